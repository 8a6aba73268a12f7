#pragma once

#include "mwp/postproc.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwp::ensemble {

struct AnswerGroup {
  AnswerValue representative;        // first member
  std::vector<std::size_t> members;  // input indices
};

// Greedy, in input order: an answer joins the first group whose
// representative is within tolerance, otherwise it starts a new group.
std::vector<AnswerGroup> group_answers(const std::vector<AnswerValue>& answers,
                                       double tolerance = kDefaultTolerance);

struct Vote {
  std::string model_id;
  std::optional<AnswerValue> answer;  // nullopt = abstained
  double confidence = 0.0;            // validation accuracy in [0, 1]
};

enum class DecidedBy { Plurality, ConfidenceSum, Fallback };
const char* to_string(DecidedBy d) noexcept;

struct VoteGroup {
  AnswerValue representative;
  std::vector<std::string> members;
  std::size_t count = 0;
  Rational confidence_sum;  // exact sum of the members' confidences

  double confidence_sum_value() const { return confidence_sum.convert_to<double>(); }
};

struct VotingResult {
  std::optional<AnswerValue> winner;
  std::optional<std::size_t> winning_group;
  std::vector<VoteGroup> groups;
  std::optional<DecidedBy> decided_by;  // empty when every vote abstained
};

// Most members wins; equal counts go to the larger confidence sum; equal sums
// go to the group holding the lexicographically smallest model id.
VotingResult plurality_vote(const std::vector<Vote>& votes, double tolerance = kDefaultTolerance);

struct TallyEntry {
  AnswerValue answer;
  std::size_t count = 0;
  std::size_t first_seen_index = 0;
};

struct ScResult {
  std::optional<AnswerValue> winner;
  std::vector<TallyEntry> tally;
  std::size_t total_samples = 0;
  std::size_t valid_samples = 0;
};

// Modal answer over samples; ties go to the earliest sampled answer.
ScResult self_consistency(const std::vector<std::optional<AnswerValue>>& answers,
                          double tolerance = kDefaultTolerance);

struct Confidence {
  std::size_t correct = 0;
  std::size_t total = 0;

  double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

// Accuracy of one model on the validation problems; a missing or abstained
// prediction counts as wrong.
Confidence validation_confidence(
    const std::map<std::string, std::optional<AnswerValue>>& predictions,
    const std::vector<std::pair<std::string, AnswerValue>>& validation,
    double tolerance = kDefaultTolerance);

}  // namespace mwp::ensemble
