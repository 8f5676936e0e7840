#include <deque>
#include <thread>

#include "doctest.h"

#include "pipeslice/spsc.hpp"

using namespace pipeslice;

TEST_CASE("capacity rules") {
  CHECK_THROWS_AS(SpscChannel<int>(0), std::invalid_argument);
  CHECK_THROWS_AS(SpscChannel<int>(1), std::invalid_argument);
  SpscChannel<int> two(2);
  CHECK(two.capacity() == 2);
  SpscChannel<int> ten(10);
  CHECK(ten.capacity() == 16);  // rounded to a power of two
}

TEST_CASE("holds at most capacity undelivered elements") {
  SpscChannel<int> ch(2);
  CHECK(ch.try_push(1) == PushResult::Ok);
  CHECK(ch.try_push(2) == PushResult::Ok);
  CHECK(ch.try_push(3) == PushResult::Full);
  int v;
  CHECK(ch.try_pop(v) == PopResult::Ok);
  CHECK(v == 1);
  CHECK(ch.try_push(3) == PushResult::Ok);
}

TEST_CASE("fresh channel is empty; closed channel drains then reports Closed") {
  SpscChannel<int> ch(4);
  int v;
  CHECK(ch.try_pop(v) == PopResult::Empty);
  CHECK(ch.try_push(7) == PushResult::Ok);
  CHECK(ch.try_pop(v) == PopResult::Ok);
  CHECK(v == 7);

  ch.try_push(1);
  ch.try_push(2);
  ch.try_push(3);
  ch.close();
  ch.close();  // idempotent
  CHECK(ch.try_pop(v) == PopResult::Ok);
  CHECK(v == 1);
  CHECK(ch.try_pop(v) == PopResult::Ok);
  CHECK(ch.try_pop(v) == PopResult::Ok);
  CHECK(v == 3);
  CHECK(ch.try_pop(v) == PopResult::Closed);
  CHECK(ch.try_pop(v) == PopResult::Closed);
}

TEST_CASE("exhaustive small-state model check against a reference queue") {
  // all op strings up to length 6 over push/pop/close, capacities 2..4
  // (the reference is a plain deque + closed flag)
  for (size_t cap : {2u, 3u, 4u}) {
    int strings = 0;
    for (int len = 1; len <= 6; ++len) {
      int total = 1;
      for (int i = 0; i < len; ++i) total *= 3;
      for (int code = 0; code < total; ++code) {
        SpscChannel<int> ch(cap);
        std::deque<int> model;
        bool closed = false;
        size_t real_cap = ch.capacity();
        int next_val = 100;
        int c = code;
        ++strings;
        for (int step = 0; step < len; ++step) {
          int op = c % 3;
          c /= 3;
          if (op == 0) {
            PushResult r = ch.try_push(next_val);
            bool model_full = model.size() >= real_cap;
            CAPTURE(cap);
            CAPTURE(code);
            CAPTURE(step);
            REQUIRE((r == PushResult::Full) == model_full);
            if (r == PushResult::Ok) model.push_back(next_val);
            ++next_val;
          } else if (op == 1) {
            int v = -1;
            PopResult r = ch.try_pop(v);
            if (model.empty()) {
              REQUIRE(r == (closed ? PopResult::Closed : PopResult::Empty));
            } else {
              REQUIRE(r == PopResult::Ok);
              REQUIRE(v == model.front());
              model.pop_front();
            }
          } else {
            ch.close();
            closed = true;
          }
        }
      }
    }
    CHECK(strings == 3 + 9 + 27 + 81 + 243 + 729);
  }
}

TEST_CASE("stress: FIFO with no loss, duplication or reorder" *
          doctest::timeout(120)) {
  constexpr int64_t kCount = 10'000'000;
  SpscChannel<int64_t> ch(1024);
  std::atomic<bool> ok{true};
  std::thread consumer([&] {
    int64_t expect = 0;
    int64_t v;
    for (;;) {
      PopResult r = ch.pop(v);
      if (r == PopResult::Closed) break;
      if (v != expect) {
        ok.store(false);
        break;
      }
      ++expect;
    }
    if (expect != kCount) ok.store(false);
  });
  for (int64_t i = 0; i < kCount; ++i) ch.push(i);
  ch.close();
  consumer.join();
  CHECK(ok.load());
  CHECK(ch.enqueues() == static_cast<uint64_t>(kCount));
  CHECK(ch.dequeues() == static_cast<uint64_t>(kCount));
}

TEST_CASE("end handles expose one side each") {
  SpscChannel<int> ch(8);
  ProducerEnd<int> prod(&ch);
  ConsumerEnd<int> cons(&ch);
  CHECK(prod.try_push(5) == PushResult::Ok);
  int v;
  CHECK(cons.try_pop(v) == PopResult::Ok);
  CHECK(v == 5);
  prod.close();
  CHECK(cons.try_pop(v) == PopResult::Closed);
}
