#include <doctest.h>

#include "nstm/errors.hpp"
#include "nstm/tm.hpp"
#include "test_machines.hpp"

using namespace nstm;

TEST_CASE("flip machine validates cleanly") {
  auto spec = testing::flip_machine();
  CHECK(validate_spec(spec).empty());
  CHECK(validate_spec(spec) == validate_spec(spec));
}

TEST_CASE("missing rule is reported as not total") {
  auto spec = testing::flip_machine();
  spec.rules.erase({*spec.find_symbol("0"), *spec.find_state("q1")});
  auto report = validate_spec(spec);
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("rules not total") != std::string::npos);
  CHECK(validate_spec(spec) == report);
}

TEST_CASE("move 0 to a live state is reported") {
  auto spec = testing::flip_machine();
  auto& r = spec.rules.at({*spec.find_symbol("0"), *spec.find_state("q1")});
  r.move = 0;
  auto report = validate_spec(spec);
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("move 0 outside q0 rules") != std::string::npos);
}

TEST_CASE("single flip step") {
  auto spec = testing::flip_machine();
  auto c = initial_config(spec, parse_input(spec, "010"));
  auto next = tm_step(spec, c);
  CHECK(render_tape(spec, next.tape) == "110");
  CHECK(next.head == 2);
  CHECK(next.state == *spec.find_state("q1"));
  CHECK(next.step == 1);
}

TEST_CASE("q0 is a fixed point apart from the step counter") {
  auto spec = testing::flip_machine();
  Configuration c{{1, 2, 0}, kHaltState, 2, 5, 0};
  auto d = c;
  for (int n = 0; n < 7; ++n) d = tm_step(spec, d);
  CHECK(d.tape == c.tape);
  CHECK(d.head == c.head);
  CHECK(d.state == kHaltState);
  CHECK(d.step == 12);
}

TEST_CASE("tape grows on both ends") {
  auto spec = testing::flip_machine();
  Configuration c{{1}, *spec.find_state("q1"), 1, 0, 0};
  auto right = tm_step(spec, c);
  CHECK(right.tape.size() == 2);
  CHECK(right.head == 2);

  auto lefty = testing::left_walker();
  auto l0 = initial_config(lefty, parse_input(lefty, "a"));
  auto l1 = tm_step(lefty, l0);
  CHECK(l1.tape.size() == 2);
  CHECK(l1.head == 1);
  CHECK(l1.left_growth == 1);

  StepOptions no_left;
  no_left.grow_left = false;
  CHECK_THROWS_AS(tm_step(lefty, l0, no_left), HeadUnderflow);

  StepOptions tiny;
  tiny.tape_cap = 1;
  CHECK_THROWS_AS(tm_step(spec, c, tiny), TapeOverflow);
}

TEST_CASE("flip machine run") {
  auto spec = testing::flip_machine();
  auto trace = tm_run(spec, parse_input(spec, "010"), 10);
  CHECK(trace.steps() == 4);
  CHECK(trace.halt == HaltReason::kReachedFinal);
  // Eager growth: the move past the last written cell appends a blank too.
  CHECK(render_tape(spec, trace.configs.back().tape) == "101bb");
  CHECK(trace.configs.back().head == 5);
  CHECK(trace.spec_hash == spec_hash(spec));
}

TEST_CASE("run edge cases") {
  auto spec = testing::flip_machine();
  auto zero = tm_run(spec, {}, 0);
  CHECK(zero.configs.size() == 1);
  CHECK(zero.halt == HaltReason::kStepBudget);

  auto quitter = testing::immediate_halt();
  auto t = tm_run(quitter, parse_input(quitter, "a"), 10);
  CHECK(t.configs.size() == 2);
  CHECK(t.halt == HaltReason::kEnteredHalt);

  CHECK_THROWS_AS(initial_config(spec, {0}), AlphabetError);
}

TEST_CASE("random machines") {
  auto a = random_tm(42, 3, 3);
  auto b = random_tm(42, 3, 3);
  auto c = random_tm(43, 3, 3);
  CHECK(canonical_bytes(a) == canonical_bytes(b));
  CHECK(canonical_bytes(a) != canonical_bytes(c));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto m = random_tm(seed, 4, 4);
    CHECK(validate_spec(m).empty());
    for (const auto& [key, rule] : m.rules)
      CHECK((rule.move == 1 || rule.move == -1));
  }
}

TEST_CASE("spec JSON round trip") {
  auto spec = testing::flip_machine();
  auto j = spec_to_json(spec);
  auto back = spec_from_json(j);
  CHECK(canonical_bytes(back) == canonical_bytes(spec));
  CHECK(spec_hash(back).size() == 64);

  auto bad = j;
  bad["states"].push_back("q0");
  CHECK_THROWS_AS(spec_from_json(bad), SpecError);
  auto unknown = j;
  unknown["rules"].push_back({"q1", "zz", "q1", "0", 1});
  CHECK_THROWS_AS(spec_from_json(unknown), SpecError);
}

TEST_CASE("rule order does not change the hash") {
  auto j = spec_to_json(testing::flip_machine());
  auto shuffled = j;
  std::reverse(shuffled["rules"].begin(), shuffled["rules"].end());
  CHECK(spec_hash(spec_from_json(shuffled)) == spec_hash(spec_from_json(j)));
}
