#include "mwp/ensemble.hpp"

#include "mwp/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mwp::ensemble {

const char* to_string(DecidedBy d) noexcept {
  switch (d) {
    case DecidedBy::Plurality: return "plurality";
    case DecidedBy::ConfidenceSum: return "confidence-sum";
    case DecidedBy::Fallback: return "fallback";
  }
  return "?";
}

std::vector<AnswerGroup> group_answers(const std::vector<AnswerValue>& answers, double tolerance) {
  if (!(tolerance >= 0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be >= 0");
  std::vector<AnswerGroup> groups;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const AnswerGroup& g) {
      return postproc::answers_equal(answers[i].value, g.representative.value, tolerance);
    });
    if (it == groups.end()) {
      groups.push_back({answers[i], {i}});
    } else {
      it->members.push_back(i);
    }
  }
  return groups;
}

VotingResult plurality_vote(const std::vector<Vote>& votes, double tolerance) {
  if (votes.empty()) throw Error(ErrorCode::InvalidArgument, "plurality vote needs at least one vote");
  std::set<std::string> ids;
  for (const auto& v : votes) {
    if (!(v.confidence >= 0.0 && v.confidence <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "confidence of '" + v.model_id + "' outside [0, 1]");
    }
    if (!ids.insert(v.model_id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate model id '" + v.model_id + "' in vote set");
    }
  }

  std::vector<AnswerValue> answers;
  std::vector<const Vote*> voters;
  for (const auto& v : votes) {
    if (v.answer) {
      answers.push_back(*v.answer);
      voters.push_back(&v);
    }
  }

  VotingResult result;
  for (const auto& g : group_answers(answers, tolerance)) {
    VoteGroup vg{g.representative, {}, g.members.size(), Rational(0)};
    for (auto idx : g.members) {
      vg.members.push_back(voters[idx]->model_id);
      vg.confidence_sum += exact_rational(voters[idx]->confidence);
    }
    result.groups.push_back(std::move(vg));
  }
  if (result.groups.empty()) return result;

  std::size_t top_count = 0;
  for (const auto& g : result.groups) top_count = std::max(top_count, g.count);
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < result.groups.size(); ++i) {
    if (result.groups[i].count == top_count) tied.push_back(i);
  }

  std::size_t best = tied.front();
  if (tied.size() == 1) {
    result.decided_by = DecidedBy::Plurality;
  } else {
    Rational top_sum = result.groups[tied.front()].confidence_sum;
    for (auto i : tied) top_sum = std::max(top_sum, result.groups[i].confidence_sum);
    std::vector<std::size_t> sum_tied;
    for (auto i : tied) {
      if (result.groups[i].confidence_sum == top_sum) sum_tied.push_back(i);
    }
    if (sum_tied.size() == 1) {
      result.decided_by = DecidedBy::ConfidenceSum;
      best = sum_tied.front();
    } else {
      result.decided_by = DecidedBy::Fallback;
      auto min_id = [&](std::size_t i) {
        return *std::min_element(result.groups[i].members.begin(), result.groups[i].members.end());
      };
      best = *std::min_element(sum_tied.begin(), sum_tied.end(),
                               [&](std::size_t a, std::size_t b) { return min_id(a) < min_id(b); });
    }
  }
  result.winning_group = best;
  result.winner = result.groups[best].representative;
  return result;
}

ScResult self_consistency(const std::vector<std::optional<AnswerValue>>& answers, double tolerance) {
  if (answers.empty()) throw Error(ErrorCode::InvalidArgument, "self-consistency needs at least one sample");
  ScResult result;
  result.total_samples = answers.size();
  std::vector<AnswerValue> valid;
  std::vector<std::size_t> position;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (answers[i]) {
      valid.push_back(*answers[i]);
      position.push_back(i);
    }
  }
  result.valid_samples = valid.size();
  for (const auto& g : group_answers(valid, tolerance)) {
    result.tally.push_back({g.representative, g.members.size(), position[g.members.front()]});
  }
  // Groups are created in sample order, so the first maximum is the earliest.
  const TallyEntry* best = nullptr;
  for (const auto& t : result.tally) {
    if (!best || t.count > best->count) best = &t;
  }
  if (best) result.winner = best->answer;
  return result;
}

Confidence validation_confidence(const std::map<std::string, std::optional<AnswerValue>>& predictions,
                                 const std::vector<std::pair<std::string, AnswerValue>>& validation,
                                 double tolerance) {
  if (validation.empty()) throw Error(ErrorCode::InvalidArgument, "empty validation set");
  Confidence c;
  c.total = validation.size();
  for (const auto& [id, gold] : validation) {
    auto it = predictions.find(id);
    if (it != predictions.end() && it->second && postproc::answers_equal(*it->second, gold, tolerance)) {
      ++c.correct;
    }
  }
  return c;
}

}  // namespace mwp::ensemble
