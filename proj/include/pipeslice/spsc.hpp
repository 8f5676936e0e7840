#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

// FastForward-style circular lock-free SPSC queue. The full/empty state
// lives in the slots themselves: the producer owns its tail cursor, the
// consumer owns its head cursor, and the two sides never read each
// other's cursor. Publication contract: the element write happens-before
// the marker-full store (release); the marker-empty store happens-after
// the element read.

namespace pipeslice {

enum class PushResult { Ok, Full };
enum class PopResult { Ok, Empty, Closed };

template <typename T>
class SpscChannel {
 public:
  explicit SpscChannel(size_t capacity) {
    if (capacity < 2)
      throw std::invalid_argument("channel capacity must be >= 2");
    size_t cap = 2;
    while (cap < capacity) cap <<= 1;
    slots_ = std::vector<Slot>(cap);
    mask_ = cap - 1;
  }

  size_t capacity() const { return slots_.size(); }

  // ---- producer side -------------------------------------------------
  PushResult try_push(const T& x) {
    Slot& s = slots_[tail_ & mask_];
    if (s.full.load(std::memory_order_acquire)) return PushResult::Full;
    s.value = x;
    s.full.store(true, std::memory_order_release);
    ++tail_;
    ++enqueues_;
    return PushResult::Ok;
  }

  // spins with bounded backoff, then yields; optional abort flag
  bool push(const T& x, const std::atomic<bool>* abort = nullptr) {
    int spins = 0;
    bool stalled = false;
    while (try_push(x) == PushResult::Full) {
      if (!stalled) {
        ++full_stalls_;
        stalled = true;
      }
      if (abort && abort->load(std::memory_order_relaxed)) return false;
      if (++spins > kSpinLimit) {
        std::this_thread::yield();
        spins = 0;
      }
    }
    return true;
  }

  void close() { closed_.store(true, std::memory_order_release); }

  // ---- consumer side -------------------------------------------------
  PopResult try_pop(T& out) {
    Slot& s = slots_[head_ & mask_];
    if (!s.full.load(std::memory_order_acquire)) {
      if (!closed_.load(std::memory_order_acquire)) return PopResult::Empty;
      // the close is ordered after the producer's final publish; re-check
      // the slot once the closed flag is visible
      if (!s.full.load(std::memory_order_acquire)) return PopResult::Closed;
    }
    out = s.value;
    s.full.store(false, std::memory_order_release);
    ++head_;
    ++dequeues_;
    return PopResult::Ok;
  }

  // blocks until an item or Closed; optional abort flag
  PopResult pop(T& out, const std::atomic<bool>* abort = nullptr) {
    int spins = 0;
    bool stalled = false;
    for (;;) {
      PopResult r = try_pop(out);
      if (r != PopResult::Empty) return r;
      if (!stalled) {
        ++empty_stalls_;
        stalled = true;
      }
      if (abort && abort->load(std::memory_order_relaxed))
        return PopResult::Closed;
      if (++spins > kSpinLimit) {
        std::this_thread::yield();
        spins = 0;
      }
    }
  }

  // ---- stats (each counter touched by one side only) -------------------
  uint64_t enqueues() const { return enqueues_; }
  uint64_t dequeues() const { return dequeues_; }
  uint64_t full_stalls() const { return full_stalls_; }
  uint64_t empty_stalls() const { return empty_stalls_; }

 private:
  static constexpr int kSpinLimit = 256;

  struct Slot {
    std::atomic<bool> full{false};
    T value{};
  };

  std::vector<Slot> slots_;
  size_t mask_ = 0;

  alignas(64) size_t tail_ = 0;  // producer only
  alignas(64) uint64_t enqueues_ = 0;
  uint64_t full_stalls_ = 0;
  alignas(64) size_t head_ = 0;  // consumer only
  alignas(64) uint64_t dequeues_ = 0;
  uint64_t empty_stalls_ = 0;
  alignas(64) std::atomic<bool> closed_{false};
};

// End handles: the producer end cannot dequeue, the consumer end cannot
// enqueue. Transfer each end to its worker; never share one end.
template <typename T>
class ProducerEnd {
 public:
  ProducerEnd() = default;
  explicit ProducerEnd(SpscChannel<T>* ch) : ch_(ch) {}
  PushResult try_push(const T& x) { return ch_->try_push(x); }
  bool push(const T& x, const std::atomic<bool>* abort = nullptr) {
    return ch_->push(x, abort);
  }
  void close() { ch_->close(); }
  SpscChannel<T>* channel() { return ch_; }

 private:
  SpscChannel<T>* ch_ = nullptr;
};

template <typename T>
class ConsumerEnd {
 public:
  ConsumerEnd() = default;
  explicit ConsumerEnd(SpscChannel<T>* ch) : ch_(ch) {}
  PopResult try_pop(T& out) { return ch_->try_pop(out); }
  PopResult pop(T& out, const std::atomic<bool>* abort = nullptr) {
    return ch_->pop(out, abort);
  }
  SpscChannel<T>* channel() { return ch_; }

 private:
  SpscChannel<T>* ch_ = nullptr;
};

}  // namespace pipeslice
