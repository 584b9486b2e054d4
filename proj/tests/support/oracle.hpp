#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's scoring or retrieval code.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oracle {

using Json = nlohmann::ordered_json;

inline std::map<std::string, int> term_counts(const std::string& text) {
  std::map<std::string, int> counts;
  std::string token;
  auto flush = [&] {
    if (token.size() > 1) ++counts[token];
    token.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  return counts;
}

// TF-IDF cosine between docs a and b of `texts`, straight from raw counts.
inline double tfidf_cosine(const std::vector<std::string>& texts, std::size_t a, std::size_t b) {
  std::vector<std::map<std::string, int>> counts;
  for (const std::string& t : texts) counts.push_back(term_counts(t));
  std::map<std::string, int> df;
  for (const auto& c : counts) {
    for (const auto& [term, n] : c) ++df[term];
  }
  const double n_docs = static_cast<double>(texts.size());
  auto weight = [&](const std::map<std::string, int>& c, const std::string& term) {
    auto it = c.find(term);
    if (it == c.end()) return 0.0;
    return it->second * (std::log((1.0 + n_docs) / (1.0 + df[term])) + 1.0);
  };
  double dot = 0, na = 0, nb = 0;
  for (const auto& [term, unused] : df) {
    const double wa = weight(counts[a], term);
    const double wb = weight(counts[b], term);
    dot += wa * wb;
    na += wa * wa;
    nb += wb * wb;
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::size_t leaves(const Json& v) {
  if (!v.is_structured()) return 1;
  std::size_t n = 0;
  for (const auto& c : v) n += leaves(c);
  return n;
}

// Matched truth leaves, trying every injective pairing of array entries.
inline std::size_t matched(const Json& g, const Json& t) {
  if (t.is_object()) {
    if (!g.is_object()) return 0;
    std::size_t n = 0;
    for (const auto& [k, v] : t.items()) {
      if (g.contains(k)) n += matched(g.at(k), v);
    }
    return n;
  }
  if (t.is_array()) {
    if (!g.is_array()) return 0;
    const std::size_t slots = std::max(t.size(), g.size());
    std::vector<std::size_t> perm(slots);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
      std::size_t n = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (perm[i] < g.size()) n += matched(g[perm[i]], t[i]);
      }
      best = std::max(best, n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  return g == t ? 1 : 0;
}

inline double score(const Json& g, const Json& t) {
  const std::size_t total = leaves(t);
  return total == 0 ? 100.0 : 100.0 * static_cast<double>(matched(g, t)) / static_cast<double>(total);
}

// Leaf paths of the shipped fixture schema, written out by hand from the
// schema file in depth-first document order.
inline const std::vector<std::string>& fixture_leaf_paths() {
  static const std::vector<std::string> paths = [] {
    const std::string e = "agreementTerms/agreement/creditSupportAgreementElections/";
    return std::vector<std::string>{
        "agreementTerms/agreement/agreementName/agreementType",
        "agreementTerms/agreement/agreementName/vintage",
        "agreementTerms/agreement/agreementName/governingLaw",
        e + "baseAndEligibleCurrency/baseCurrency",
        e + "baseAndEligibleCurrency/eligibleCurrency/[]",
        e + "threshold/[]/thresholdType/fixedAmount/amount",
        e + "threshold/[]/thresholdType/fixedAmount/currency",
        e + "threshold/[]/thresholdType/fixedAmount/party",
        e + "threshold/[]/thresholdType/infinite",
        e + "threshold/[]/thresholdType/customElection",
        e + "minimumTransferAmount/[]/mtaType/fixedAmount/amount",
        e + "minimumTransferAmount/[]/mtaType/fixedAmount/currency",
        e + "minimumTransferAmount/[]/mtaType/fixedAmount/party",
        e + "minimumTransferAmount/[]/mtaType/zeroAmount",
        e + "minimumTransferAmount/[]/mtaType/conditionalElection/condition",
        e + "minimumTransferAmount/[]/mtaType/customElection",
        e + "rounding/deliveryAmount/amount",
        e + "rounding/deliveryAmount/direction",
        e + "rounding/returnAmount/amount",
        e + "rounding/returnAmount/direction",
        e + "independentAmount/[]/party",
        e + "independentAmount/[]/amount",
        e + "independentAmount/[]/currency",
        e + "valuationAgent/party/[]",
        e + "valuationAgent/calculationAgentIsValuationAgent",
        e + "calculationDateLocation",
        e + "notificationTime",
        "agreementTerms/counterparty/[]/role",
        "agreementTerms/counterparty/[]/partyName",
    };
  }();
  return paths;
}

}  // namespace oracle
