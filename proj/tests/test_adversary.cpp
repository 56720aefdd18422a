//------------------------------------------------------------------------------
//
//   Copyright 2026 the shardsim authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include <doctest.h>

#include "shardsim/adversary.hpp"

using namespace shardsim;
using namespace shardsim::adversary;

TEST_SUITE("adversary") {

TEST_CASE("mild corruption takes effect after tau") {
  AdversaryConfig cfg;
  cfg.rho = 0.25;
  cfg.timing = CorruptionTiming::Adaptive;
  cfg.tau = 100;
  CorruptionLedger ledger(cfg, 16);
  ledger.begin_run();
  CHECK_FALSE(ledger.request_corruption(3, 50).has_value());
  CHECK(ledger.corrupted_set(149).empty());   // remains honest before t+tau
  CHECK(ledger.corrupted_set(150).count(3) == 1);
  CHECK(ledger.is_corrupted(3, 150));
}

TEST_CASE("static corruption rejects mid-run requests") {
  AdversaryConfig cfg;
  cfg.rho = 0.25;
  cfg.timing = CorruptionTiming::Static;
  CorruptionLedger ledger(cfg, 16);
  CHECK_FALSE(ledger.request_corruption(1, 0).has_value());  // pre-run ok
  ledger.begin_run();
  auto err = ledger.request_corruption(2, 10);
  REQUIRE(err.has_value());
  CHECK(*err == CorruptionError::StaticTimingViolation);
}

TEST_CASE("the corruption budget caps at floor(rho * n)") {
  AdversaryConfig cfg;
  cfg.rho = 0.25;
  cfg.timing = CorruptionTiming::Adaptive;
  CorruptionLedger ledger(cfg, 16);
  ledger.begin_run();
  for (NodeId n = 0; n < 4; ++n)
    CHECK_FALSE(ledger.request_corruption(n, 0).has_value());
  auto err = ledger.request_corruption(4, 0);
  REQUIRE(err.has_value());
  CHECK(*err == CorruptionError::BudgetExceeded);
  CHECK(ledger.budget() == 4);
}

TEST_CASE("the corrupted set is empty before any request") {
  AdversaryConfig cfg;
  cfg.rho = 0.4;
  CorruptionLedger ledger(cfg, 10);
  CHECK(ledger.corrupted_set(1000).empty());
}

TEST_CASE("immediate corruption is tau zero") {
  AdversaryConfig cfg;
  cfg.rho = 0.4;
  cfg.tau = 0;
  CorruptionLedger ledger(cfg, 10);
  ledger.begin_run();
  CHECK_FALSE(ledger.request_corruption(7, 42).has_value());
  CHECK(ledger.is_corrupted(7, 42));
}

TEST_CASE("double targeting is rejected") {
  AdversaryConfig cfg;
  cfg.rho = 0.4;
  CorruptionLedger ledger(cfg, 10);
  ledger.begin_run();
  CHECK_FALSE(ledger.request_corruption(1, 0).has_value());
  auto err = ledger.request_corruption(1, 5);
  REQUIRE(err.has_value());
  CHECK(*err == CorruptionError::AlreadyTargeted);
}

TEST_CASE("rho outside [0, 1/2) is rejected") {
  AdversaryConfig cfg;
  cfg.rho = 0.5;
  CHECK_THROWS_AS(CorruptionLedger(cfg, 10), std::invalid_argument);
}

TEST_CASE("strategy names round-trip") {
  for (auto s : {Strategy::Equivocate, Strategy::Withhold, Strategy::SelfishMine,
                 Strategy::DelayMax, Strategy::CensorNodes, Strategy::ReplayCert,
                 Strategy::FloodShard}) {
    auto parsed = strategy_from_name(strategy_name(s));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == s);
  }
  CHECK_FALSE(strategy_from_name("no-such-strategy").has_value());
}

}  // TEST_SUITE
