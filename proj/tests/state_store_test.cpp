#include <gtest/gtest.h>

#include <random>

#include "sipwall/state_store.hpp"
#include "test_support.hpp"

using namespace sipwall;
using namespace std::chrono_literals;

namespace {

ContainerDescriptor desc(std::string name, ContainerKind kind, ScopeKind scope = ScopeKind::dialog,
                         Timestamp lifetime = 1800s) {
  ContainerDescriptor d;
  d.name = std::move(name);
  d.kind = kind;
  d.scope = scope;
  d.lifetime = lifetime;
  return d;
}

ContainerDescriptor counter(std::int64_t leak, Timestamp interval) {
  auto d = desc("rate", ContainerKind::counter, ScopeKind::global, kForever);
  d.leak_amount = leak;
  d.leak_interval = interval;
  return d;
}

const ScopeKey kDlg = ScopeKey::dialog({"abc", "f1", ""});

}  // namespace

TEST(Resolve, CreatesOnceAndExpires) {
  StateStore s({desc("from_list", ContainerKind::set)});
  auto& a = s.resolve("from_list", kDlg, 0s);
  EXPECT_EQ(a.size(0s), 0);
  a.insert("x", 0s);
  auto& b = s.resolve("from_list", kDlg, 10s);
  EXPECT_EQ(&a, &b);
  EXPECT_TRUE(b.contains("x"));
  auto& c = s.resolve("from_list", kDlg, 10s + 1801s);
  EXPECT_FALSE(c.contains("x"));
  EXPECT_EQ(s.live_instances(), 1u);
}

TEST(Resolve, FindDoesNotCreate) {
  StateStore s({desc("l", ContainerKind::set)});
  EXPECT_EQ(s.find(0, kDlg, 0s), nullptr);
  EXPECT_EQ(s.live_instances(), 0u);
}

TEST(Resolve, UnknownObject) {
  StateStore s({desc("l", ContainerKind::set)});
  EXPECT_THROW(s.resolve("nope", kDlg, 0s), std::logic_error);
}

TEST(Insert, Semantics) {
  StateStore s({desc("s", ContainerKind::set), desc("l", ContainerKind::list), desc("b", ContainerKind::bag)});
  auto& set = s.resolve("s", kDlg, 0s);
  set.insert("alice", 0s);
  set.insert("alice", 0s);
  EXPECT_EQ(set.size(0s), 1);
  auto& list = s.resolve("l", kDlg, 0s);
  list.insert("a", 0s);
  list.insert("a", 0s);
  EXPECT_EQ(std::get<ContainerInstance::List>(list.payload()), (ContainerInstance::List{"a", "a"}));
  auto& bag = s.resolve("b", kDlg, 0s);
  for (int i = 0; i < 3; ++i) bag.insert("x", 0s);
  EXPECT_EQ(bag.multiplicity("x"), 3u);
}

TEST(Membership, Examples) {
  StateStore s({desc("from_list", ContainerKind::set)});
  auto& set = s.resolve("from_list", kDlg, 0s);
  set.insert("<sip:alice@a>;tag=1", 0s);
  EXPECT_TRUE(set.contains("<sip:alice@a>;tag=1"));
  EXPECT_FALSE(set.contains("<sip:mallory@m>;tag=9"));
}

TEST(Membership, NormalizedValues) {
  StateStore s({desc("from_list", ContainerKind::set)});
  auto& set = s.resolve("from_list", kDlg, 0s);
  std::string big(2000, 'a');
  big[1500] = 'b';
  set.insert(big, 0s);
  std::string query = big.substr(0, 1024) + "zzz";
  EXPECT_TRUE(set.contains(query));
  for (const auto& v : std::get<ContainerInstance::Set>(set.payload())) EXPECT_LE(v.size(), 1024u);
}

TEST(Counter, Examples) {
  {
    StateStore s({counter(10, 60s)});
    auto& c = s.resolve("rate", ScopeKey::global(), 0s);
    for (int i = 0; i < 5; ++i) c.counter_increment(0s);
    EXPECT_EQ(c.counter_value(0s), 5);
    EXPECT_EQ(c.counter_increment(61s), 1);
  }
  {
    StateStore s({counter(0, 60s)});
    auto& c = s.resolve("rate", ScopeKey::global(), 0s);
    for (int i = 0; i < 16; ++i) c.counter_increment(seconds(i * 100));
    EXPECT_EQ(c.counter_value(seconds(5000)), 16);
  }
  {
    StateStore s({counter(10, 60s)});
    auto& c = s.resolve("rate", ScopeKey::global(), 0s);
    for (int i = 0; i < 20; ++i) c.counter_increment(0s);
    EXPECT_EQ(c.counter_value(59s), 20);
    EXPECT_EQ(c.counter_value(120s), 0);
  }
  {
    StateStore s({counter(10, 60s)});
    auto& c = s.resolve("rate", ScopeKey::global(), 0s);
    for (int i = 0; i < 3; ++i) c.counter_increment(0s);
    EXPECT_EQ(c.counter_value(600s), 0);
  }
}

TEST(Counter, OracleEquivalence) {
  std::mt19937_64 rng(2024);
  for (int seq = 0; seq < 10000; ++seq) {
    std::int64_t leak = static_cast<std::int64_t>(rng() % 6);
    std::int64_t interval_us = 1 + static_cast<std::int64_t>(rng() % 5'000'000);
    StateStore s({counter(leak, Timestamp(interval_us))});
    testsup::LeakyOracle oracle(leak, interval_us);
    std::int64_t t = static_cast<std::int64_t>(rng() % 1'000'000);
    auto& c = s.resolve("rate", ScopeKey::global(), Timestamp(t));
    oracle.start(t);
    int ops = 1 + static_cast<int>(rng() % 60);
    for (int k = 0; k < ops; ++k) {
      t += static_cast<std::int64_t>(rng() % (3 * interval_us + 1));
      if (rng() % 3) {
        ASSERT_EQ(c.counter_increment(Timestamp(t)), oracle.increment(t)) << "seq " << seq;
      } else {
        ASSERT_EQ(c.counter_value(Timestamp(t)), oracle.read(t)) << "seq " << seq;
      }
    }
  }
}

TEST(Counter, MonotoneDecay) {
  StateStore s({counter(3, 7s)});
  auto& c = s.resolve("rate", ScopeKey::global(), 0s);
  for (int i = 0; i < 50; ++i) c.counter_increment(seconds(i * 0.1));
  std::int64_t prev = c.counter_value(5s);
  for (int t = 5; t < 200; ++t) {
    auto v = c.counter_value(seconds(t));
    EXPECT_LE(v, prev);
    EXPECT_GE(v, 0);
    prev = v;
  }
}

TEST(Expire, Boundaries) {
  StateStore s({desc("l", ContainerKind::set)});
  s.resolve("l", kDlg, 0s).insert("x", 0s);
  EXPECT_EQ(s.expire(1800s), 0u);
  EXPECT_EQ(s.live_instances(), 1u);
  EXPECT_EQ(s.expire(1801s), 1u);
  EXPECT_EQ(s.live_instances(), 0u);
}

TEST(Expire, Bulk) {
  StateStore s({desc("l", ContainerKind::set)});
  for (int i = 0; i < 1000; ++i) s.resolve("l", ScopeKey::dialog({std::to_string(i), "f", ""}), 0s);
  EXPECT_EQ(s.live_instances(), 1000u);
  EXPECT_EQ(s.expire(3600s), 1000u);
  EXPECT_EQ(s.live_instances(), 0u);
  EXPECT_EQ(s.live_instances(0), 0u);
}

TEST(Scope, Isolation) {
  StateStore s({desc("l", ContainerKind::set)});
  auto a = ScopeKey::dialog({"A", "f", "t"});
  auto b = ScopeKey::dialog({"B", "f", "t"});
  s.resolve("l", a, 0s).insert("only-a", 0s);
  EXPECT_EQ(s.find(0, b, 0s), nullptr);
  EXPECT_FALSE(s.resolve("l", b, 0s).contains("only-a"));
  EXPECT_TRUE(s.find(0, a, 0s)->contains("only-a"));
}

TEST(Scope, EarlyDialogPromotion) {
  StateStore s({desc("l", ContainerKind::set)});
  s.resolve("l", ScopeKey::dialog({"c", "f", ""}), 0s).insert("v", 0s);
  auto confirmed = ScopeKey::dialog({"c", "f", "t"});
  ASSERT_NE(s.find(0, confirmed, 1s), nullptr);
  EXPECT_TRUE(s.find(0, confirmed, 1s)->contains("v"));
  s.resolve("l", confirmed, 1s).insert("w", 1s);
  EXPECT_EQ(s.live_instances(), 1u);
  EXPECT_FALSE(s.find(0, ScopeKey::dialog({"c", "other", "t"}), 1s));
}
