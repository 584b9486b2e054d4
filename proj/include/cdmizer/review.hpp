#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "cdmizer/config.hpp"
#include "cdmizer/types.hpp"

namespace cdmizer {

class NotFound : public Error {
 public:
  using Error::Error;
};

class BadRequest : public Error {
 public:
  using Error::Error;
};

struct TaskFilter {
  std::optional<bool> scored;
  std::optional<ClauseKind> clause;
  std::optional<Mode> mode;
  std::size_t page = 1;
  std::size_t page_size = 50;
};

// Manual-review operations over the runs below `runs_root`. Runs are loaded on
// first use from their config.json; reads may run concurrently, score
// submissions are serialized per run and persisted before they are applied.
class ReviewService {
 public:
  explicit ReviewService(std::filesystem::path runs_root);
  ~ReviewService();

  Json list_tasks(const std::string& run_id, const TaskFilter& filter);
  Json get_task(const std::string& run_id, const std::string& task_id);
  // Body: {"score": 0..100, "scorer": "<name>"}.
  Json submit_score(const std::string& run_id, const std::string& task_id, const Json& body);
  Json report(const std::string& run_id);

  const std::filesystem::path& runs_root() const { return root_; }

 private:
  struct RunState;
  std::shared_ptr<RunState> run(const std::string& run_id);

  std::filesystem::path root_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<RunState>> runs_;
};

TaskFilter parse_task_filter(const std::multimap<std::string, std::string>& params);

// HTTP front end. bind() reports an occupied port as an error; serve() blocks
// until stop().
class ReviewServer {
 public:
  ReviewServer(ReviewService& service, ReviewSettings settings);
  ~ReviewServer();

  int bind();
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cdmizer
