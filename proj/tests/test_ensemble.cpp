#include "doctest.h"

#include "vote_oracle.hpp"

#include "mwp/ensemble.hpp"
#include "mwp/error.hpp"

#include <algorithm>
#include <random>

using namespace mwp::ensemble;
using mwp::AnswerValue;
using mwp::Rational;

namespace {

AnswerValue val(const char* literal) { return mwp::postproc::parse_answer_literal(literal); }
AnswerValue val(long long n, long long d = 1) { return AnswerValue::from(Rational(n, d)); }

const double kTable2[] = {0.239, 0.248, 0.239, 0.232, 0.238, 0.244, 0.234, 0.244, 0.238, 0.252};

std::vector<Vote> votes_from(const std::vector<std::optional<AnswerValue>>& answers,
                             const std::vector<double>& confidences) {
  std::vector<Vote> out;
  for (std::size_t i = 0; i < answers.size(); ++i) out.push_back({"M" + std::to_string(i), answers[i], confidences[i]});
  return out;
}

mwp::ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const mwp::Error& e) {
    return e.code();
  }
  return mwp::ErrorCode::Internal;
}

}  // namespace

TEST_CASE("group_answers examples") {
  const auto g = group_answers({val("4.0"), val("4.0"), val("3.9")}, 1e-4);
  REQUIRE(g.size() == 2);
  CHECK(g[0].representative.value == 4);
  CHECK(g[0].members == std::vector<std::size_t>{0, 1});
  CHECK(g[1].representative.value == Rational(39, 10));
  CHECK(g[1].members.size() == 1);

  const auto close = group_answers({val("0.9"), val("0.90005")}, 1e-3);
  REQUIRE(close.size() == 1);
  CHECK(close[0].members.size() == 2);
  CHECK(group_answers({}, 1e-4).empty());
  CHECK(code_of([] { group_answers({val(1)}, -1); }) == mwp::ErrorCode::InvalidArgument);
}

TEST_CASE("plurality_vote examples") {
  std::vector<std::optional<AnswerValue>> answers(6, val("4.0"));
  answers.insert(answers.end(), 4, val("5.0"));
  const auto strict = plurality_vote(votes_from(answers, std::vector<double>(kTable2, kTable2 + 10)));
  CHECK(strict.winner->value == 4);
  CHECK(strict.decided_by == DecidedBy::Plurality);

  std::vector<std::optional<AnswerValue>> tied(5, val(8));
  tied.insert(tied.end(), 5, val(6));
  const auto sums = plurality_vote(votes_from(tied, std::vector<double>(kTable2, kTable2 + 10)));
  CHECK(sums.winner->value == 6);
  CHECK(sums.decided_by == DecidedBy::ConfidenceSum);
  REQUIRE(sums.groups.size() == 2);
  CHECK(sums.groups[0].confidence_sum_value() == doctest::Approx(1.196).epsilon(1e-12));
  CHECK(sums.groups[1].confidence_sum_value() == doctest::Approx(1.212).epsilon(1e-12));

  std::vector<std::optional<AnswerValue>> distinct;
  for (int i = 0; i < 10; ++i) distinct.push_back(val(i + 1));
  const auto singles = plurality_vote(votes_from(distinct, std::vector<double>(kTable2, kTable2 + 10)));
  CHECK(singles.groups.size() == 10);
  CHECK(singles.winner->value == 10);  // M9 holds the largest confidence, 0.252
  CHECK(singles.decided_by == DecidedBy::ConfidenceSum);

  const auto fallback = plurality_vote(votes_from({val(1), val(2)}, {0.5, 0.5}));
  CHECK(fallback.winner->value == 1);
  CHECK(fallback.decided_by == DecidedBy::Fallback);
}

TEST_CASE("plurality_vote abstentions and errors") {
  const auto none = plurality_vote(votes_from({std::nullopt, std::nullopt}, {0.3, 0.4}));
  CHECK_FALSE(none.winner);
  CHECK_FALSE(none.decided_by);
  CHECK(none.groups.empty());

  const auto some = plurality_vote(votes_from({std::nullopt, val(3), std::nullopt}, {0.9, 0.1, 0.9}));
  CHECK(some.winner->value == 3);
  CHECK(some.groups.size() == 1);
  CHECK(some.groups[0].count == 1);

  CHECK(code_of([] { plurality_vote({}); }) == mwp::ErrorCode::InvalidArgument);
  CHECK(code_of([] { plurality_vote({{"M0", val(1), 1.5}}); }) == mwp::ErrorCode::InvalidArgument);
  CHECK(code_of([] { plurality_vote({{"M0", val(1), 0.5}, {"M0", val(2), 0.5}}); }) ==
        mwp::ErrorCode::InvalidArgument);
}

TEST_CASE("self_consistency examples") {
  std::vector<std::optional<AnswerValue>> samples;
  samples.insert(samples.end(), 11, val("0.9"));
  samples.insert(samples.end(), 6, val(900));
  samples.insert(samples.end(), 3, std::nullopt);
  std::mt19937_64 rng(3);
  std::shuffle(samples.begin(), samples.end(), rng);
  const auto r = self_consistency(samples);
  CHECK(r.winner->value == Rational(9, 10));
  CHECK(r.valid_samples == 17);
  CHECK(r.total_samples == 20);

  CHECK(self_consistency({val(330)}).winner->value == 330);
  const auto none = self_consistency(std::vector<std::optional<AnswerValue>>(20));
  CHECK_FALSE(none.winner);
  CHECK(none.valid_samples == 0);
  CHECK(code_of([] { self_consistency({}); }) == mwp::ErrorCode::InvalidArgument);

  const auto tie = self_consistency({std::nullopt, val(35), val(350), val(350), val(35)});
  CHECK(tie.winner->value == 35);
  REQUIRE(tie.tally.size() == 2);
  CHECK(tie.tally[0].first_seen_index == 1);
  CHECK(tie.tally[1].first_seen_index == 2);
}

TEST_CASE("validation_confidence examples") {
  std::map<std::string, std::optional<AnswerValue>> predictions;
  std::vector<std::pair<std::string, AnswerValue>> validation;
  for (int i = 0; i < 2316; ++i) {
    const std::string id = std::to_string(i);
    validation.emplace_back(id, val(i));
    predictions[id] = i < 583 ? val(i) : val(i + 1);
  }
  const auto c = validation_confidence(predictions, validation);
  CHECK(c.correct == 583);
  CHECK(c.total == 2316);
  CHECK(c.value() == doctest::Approx(0.2517).epsilon(1e-3));

  std::map<std::string, std::optional<AnswerValue>> perfect;
  for (const auto& [id, gold] : validation) perfect[id] = gold;
  CHECK(validation_confidence(perfect, validation).value() == 1.0);
  CHECK(validation_confidence({}, validation).value() == 0.0);
  CHECK(code_of([] { validation_confidence({}, {}); }) == mwp::ErrorCode::InvalidArgument);
}

TEST_CASE("plurality_vote matches the brute-force oracle") {
  const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    std::vector<oracle::Ballot> ballots;
    std::vector<Vote> votes;
    for (int i = 0; i < n; ++i) {
      const int choice = static_cast<int>(rng() % 4);
      const std::optional<int> answer = choice == 3 ? std::nullopt : std::optional<int>(choice * 10 + 1);
      const double conf = grid[rng() % 5];
      const std::string id = "M" + std::to_string((i + trial) % n);
      ballots.push_back({id, answer, conf});
      votes.push_back({id, answer ? std::optional<AnswerValue>(val(*answer)) : std::nullopt, conf});
    }
    const auto expected = oracle::vote(ballots);
    const auto got = plurality_vote(votes);
    REQUIRE(got.winner.has_value() == expected.winner.has_value());
    if (expected.winner) {
      REQUIRE(got.winner->value == *expected.winner);
      REQUIRE(to_string(*got.decided_by) == expected.decided_by);
    }
  }
}

TEST_CASE("voting properties") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 3000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<Vote> votes;
    for (int i = 0; i < n; ++i) {
      std::optional<AnswerValue> a;
      if (rng() % 5) a = val(static_cast<long long>(rng() % 4), 1 + static_cast<long long>(rng() % 2));
      votes.push_back({"M" + std::to_string(i), a, static_cast<double>(rng() % 1001) / 1000.0});
    }
    const auto base = plurality_vote(votes);

    // counts partition the non-abstaining votes
    std::size_t counted = 0;
    for (const auto& g : base.groups) counted += g.count;
    REQUIRE(counted == static_cast<std::size_t>(std::count_if(votes.begin(), votes.end(), [](const Vote& v) { return v.answer.has_value(); })));

    // strict plurality dominance
    if (!base.groups.empty()) {
      std::vector<std::size_t> counts;
      for (const auto& g : base.groups) counts.push_back(g.count);
      std::sort(counts.rbegin(), counts.rend());
      if (counts.size() == 1 || counts[0] > counts[1]) REQUIRE(base.decided_by == DecidedBy::Plurality);
    }

    // permutation invariance of the winner
    auto shuffled = votes;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = plurality_vote(shuffled);
    REQUIRE(again.winner.has_value() == base.winner.has_value());
    if (base.winner) REQUIRE(again.winner->value == base.winner->value);
  }
}

TEST_CASE("self_consistency winning count is permutation invariant") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::optional<AnswerValue>> samples;
    for (int i = 0; i < 20; ++i) {
      if (rng() % 6) samples.push_back(val(static_cast<long long>(rng() % 5)));
      else samples.push_back(std::nullopt);
    }
    auto winning_count = [](const ScResult& r) {
      std::size_t best = 0;
      for (const auto& t : r.tally) {
        if (r.winner && t.answer.value == r.winner->value) best = t.count;
      }
      return best;
    };
    const auto a = self_consistency(samples);
    std::size_t max_count = 0;
    for (const auto& t : a.tally) max_count = std::max(max_count, t.count);
    REQUIRE(winning_count(a) == max_count);
    std::shuffle(samples.begin(), samples.end(), rng);
    REQUIRE(winning_count(self_consistency(samples)) == winning_count(a));
  }
}

TEST_CASE("tolerance monotonicity and confidence bounds") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<AnswerValue> answers;
    for (int i = 0; i < 12; ++i) answers.push_back(val(static_cast<long long>(rng() % 2000), 1000));
    std::size_t previous = answers.size() + 1;
    for (double tol : {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0}) {
      const auto groups = group_answers(answers, tol).size();
      REQUIRE(groups <= previous);
      previous = groups;
    }
  }
  std::map<std::string, std::optional<AnswerValue>> preds{{"a", val(1)}, {"b", val(2)}, {"c", std::nullopt}};
  std::vector<std::pair<std::string, AnswerValue>> gold{{"a", val(1)}, {"b", val(3)}, {"c", val(4)}};
  const auto c = validation_confidence(preds, gold);
  CHECK(c.correct == 1);
  CHECK(c.total == 3);
  CHECK(c.value() >= 0.0);
  CHECK(c.value() <= 1.0);
}
