#include <gtest/gtest.h>

#include <csignal>

#include "uncertain/live/outcome.hpp"

namespace {

using namespace uncertain::live;

RunRecord exited(int code, std::string out, double wall) {
  RunRecord r;
  r.status.code = code;
  r.stdout_data = std::move(out);
  r.wall_seconds = wall;
  return r;
}

TEST(Outcome, IdenticalOutputSlightlySlowerSucceeds) {
  const auto base = exited(0, "result\n", 1.0);
  EXPECT_EQ(classify_outcome(exited(0, "result\n", 1.1), base), Outcome::kSucceeded);
}

TEST(Outcome, PartialOutputCleanExitIsHampered) {
  const auto base = exited(0, "line1\nline2\n", 1.0);
  EXPECT_EQ(classify_outcome(exited(0, "line1\n", 1.0), base), Outcome::kHampered);
}

TEST(Outcome, SegfaultCrashes) {
  RunRecord r = exited(0, "", 0.1);
  r.status.kind = ExitStatus::Kind::kSignaled;
  r.status.signal = SIGSEGV;
  EXPECT_EQ(classify_outcome(r, exited(0, "", 0.1)), Outcome::kCrashed);
  EXPECT_EQ(r.status.shell_code(), 128 + SIGSEGV);
}

TEST(Outcome, RuntimeBudget) {
  const auto base = exited(0, "x", 1.0);
  EXPECT_EQ(classify_outcome(exited(0, "x", 2.0), base), Outcome::kSucceeded);
  EXPECT_EQ(classify_outcome(exited(0, "x", 2.01), base), Outcome::kCrashed);
  EXPECT_EQ(classify_outcome(exited(0, "x", 2.2), base, 2.0, 0.25), Outcome::kSucceeded);
  RunRecord t = exited(0, "", 0);
  t.status.kind = ExitStatus::Kind::kTimeout;
  EXPECT_EQ(classify_outcome(t, base), Outcome::kCrashed);
}

TEST(Outcome, ExitCodes) {
  EXPECT_EQ(classify_outcome(exited(1, "x", 1), exited(0, "x", 1)), Outcome::kCrashed);
  // A program that normally fails still "succeeds" if it fails the same way.
  EXPECT_EQ(classify_outcome(exited(2, "x", 1), exited(2, "x", 1)), Outcome::kSucceeded);
  EXPECT_EQ(classify_outcome(exited(3, "x", 1), exited(2, "x", 1)), Outcome::kHampered);
  EXPECT_EQ(classify_outcome(exited(0, "x", 1), exited(2, "x", 1)), Outcome::kHampered);
}

TEST(Outcome, NeedsBaseline) {
  EXPECT_THROW(classify_outcome(exited(0, "", 1), std::nullopt), MissingBaseline);
}

TEST(Outcome, StringForms) {
  for (const auto o : {Outcome::kSucceeded, Outcome::kHampered, Outcome::kCrashed}) {
    EXPECT_EQ(outcome_from_string(to_string(o)), o);
  }
  EXPECT_FALSE(outcome_from_string("exploded"));
}

}  // namespace
