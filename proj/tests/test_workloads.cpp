#include "doctest.h"

#include "pipeslice/plan.hpp"
#include "pipeslice/runtime.hpp"
#include "pipeslice/validate.hpp"
#include "pipeslice/workloads.hpp"

using namespace pipeslice;

TEST_CASE("six workloads ship, parse and validate") {
  auto names = workloads::names();
  REQUIRE(names.size() == 6);
  for (const auto& n : names) {
    CAPTURE(n);
    Program p = workloads::program(n);
    CHECK(validate(p).empty());
    auto params = workloads::default_params(n);
    for (const auto& [k, v] : params) {
      CAPTURE(k);
      CHECK(v >= 1);
    }
  }
}

TEST_CASE("every workload's candidate loop is transformable") {
  for (const auto& n : workloads::names()) {
    CAPTURE(n);
    PlanConfig pc;
    PipelinePlan plan = plan_dswp_slice(workloads::program(n), pc);
    CHECK_FALSE(plan.degenerate);
    if (n == "overhead") {
      CHECK_FALSE(plan.sliced);  // pure single-output kernels
      CHECK(plan.worker_count == 2);
    } else {
      CHECK(plan.sliced);
      CHECK(plan.worker_count >= 3);
    }
  }
}

TEST_CASE("random parameter draws stay in range and vary") {
  for (const auto& n : workloads::names()) {
    bool varied = false;
    auto first = workloads::random_params(n, 0);
    for (uint64_t seed = 0; seed < 20; ++seed) {
      auto params = workloads::random_params(n, seed);
      for (const auto& [k, v] : params) {
        CAPTURE(n);
        CAPTURE(k);
        CHECK(v >= 0);
        CHECK(v <= 512);
      }
      if (params != first) varied = true;
    }
    CHECK(varied);
  }
}

TEST_CASE("inputs are deterministic in the seed") {
  auto a = workloads::input("linkedlist2", {{"outer_len", 5}, {"inner_len", 3}}, 42);
  auto b = workloads::input("linkedlist2", {{"outer_len", 5}, {"inner_len", 3}}, 42);
  auto c = workloads::input("linkedlist2", {{"outer_len", 5}, {"inner_len", 3}}, 43);
  CHECK(a.lists.at("head") == b.lists.at("head"));
  CHECK(a.lists.at("head") != c.lists.at("head"));
}

TEST_CASE("workload sources are exposed for the CLI") {
  CHECK(workloads::exists("listcalc"));
  CHECK_FALSE(workloads::exists("nope"));
  CHECK(workloads::source("sphharm").find("func sh_accum") !=
        std::string::npos);
}
