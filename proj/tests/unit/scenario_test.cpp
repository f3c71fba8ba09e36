#include <gtest/gtest.h>

#include "uncertain/replay.hpp"
#include "uncertain/scenario.hpp"

namespace {

using namespace uncertain;

TraceFile gen(Archetype a, std::size_t n, std::uint64_t seed) {
  ScenarioSpec s;
  s.archetype = a;
  s.event_count = n;
  return generate_scenario(s, seed);
}

double share(const TraceFile& t, bool (*pred)(const SyscallEvent&)) {
  std::size_t hit = 0;
  for (const auto& e : t.events) hit += pred(e);
  return static_cast<double>(hit) / static_cast<double>(t.events.size());
}

TEST(Scenario, FlooderIsMostlyNetwork) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t = gen(Archetype::kFlooder, 10000, seed);
    ASSERT_EQ(t.events.size(), 10000u);
    EXPECT_GE(share(t, [](const SyscallEvent& e) { return e.name.category() == SyscallCategory::kNetwork; }), 0.90);
  }
}

TEST(Scenario, BenignCpuRarelyTouchesTheSet) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t = gen(Archetype::kBenignCPU, 10000, seed);
    EXPECT_LT(share(t, [](const SyscallEvent& e) { return e.name.in_set(); }), 0.10);
  }
}

TEST(Scenario, DeterministicPerSeed) {
  for (std::size_t i = 0; i < kArchetypeNames.size(); ++i) {
    const auto a = static_cast<Archetype>(i);
    EXPECT_EQ(serialize_trace(gen(a, 2000, 7)), serialize_trace(gen(a, 2000, 7))) << kArchetypeNames[i];
    EXPECT_NE(serialize_trace(gen(a, 2000, 7)), serialize_trace(gen(a, 2000, 8))) << kArchetypeNames[i];
  }
}

TEST(Scenario, EveryArchetypeProducesAValidTrace) {
  for (std::size_t i = 0; i < kArchetypeNames.size(); ++i) {
    const auto a = static_cast<Archetype>(i);
    const auto t = gen(a, 3000, 11);
    if (a != Archetype::kAPT) {
      EXPECT_EQ(t.events.size(), 3000u) << kArchetypeNames[i];
    }
    const auto text = serialize_trace(t);
    EXPECT_NO_THROW(parse_trace_text(text)) << kArchetypeNames[i];
    EXPECT_EQ(t.header.meta["archetype"], std::string(kArchetypeNames[i]));
    EXPECT_EQ(t.header.meta["synthetic"], true);
  }
}

TEST(Scenario, ArchetypeNames) {
  EXPECT_EQ(archetype_from_string("apt"), Archetype::kAPT);
  EXPECT_EQ(archetype_from_string("trojan-backdoor"), Archetype::kTrojanBackdoor);
  EXPECT_THROW(archetype_from_string("ransomware"), ScenarioError);
}

// Replaying the APT trace under the dynamic policy escalates sys_write and
// sys_dup2, while sys_read stays at the default.
TEST(Scenario, AptEscalatesWriteAndDup2) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = gen(Archetype::kAPT, 400, seed);
    const auto r = replay_trace(t, PolicyConfig{}, seed);
    bool elf_seen = false, dup2_seen = false;
    for (std::size_t i = 0; i < r.decisions.size(); ++i) {
      const auto& d = r.decisions[i];
      if (d.reason == PassReason::kProtected) continue;
      if (d.name == "sys_write") {
        if (!elf_seen) {
          for (const auto b : d.behaviors) elf_seen |= b == Behavior::kElfHeaderWrite;
        }
        ASSERT_EQ(d.threshold_used, elf_seen ? 0.95 : 0.10) << "seed " << seed;
      }
      if (d.name == "sys_dup2") {
        dup2_seen = true;
        ASSERT_EQ(d.threshold_used, 0.95) << "seed " << seed;
      }
      if (d.name == "sys_read") {
        ASSERT_EQ(d.threshold_used, 0.10) << "seed " << seed;
      }
    }
    EXPECT_TRUE(elf_seen);
    EXPECT_TRUE(dup2_seen);
  }
}

TEST(Scenario, AptPaddingReachesRequestedLength) {
  const auto t = gen(Archetype::kAPT, 5000, 3);
  EXPECT_EQ(t.events.size(), 5000u);
  EXPECT_EQ(gen(Archetype::kAPT, 10, 3).events.size(), gen(Archetype::kAPT, 0, 3).events.size());
}

}  // namespace
