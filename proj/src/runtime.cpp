#include "pipeslice/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "pipeslice/spsc.hpp"
#include "pipeslice/validate.hpp"

namespace pipeslice {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Sequential: return "sequential";
    case Mode::Dswp: return "dswp";
    case Mode::DswpSlice: return "dswp-slice";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "sequential" || s == "seq") return Mode::Sequential;
  if (s == "dswp") return Mode::Dswp;
  if (s == "dswp-slice" || s == "dswp_slice") return Mode::DswpSlice;
  throw std::runtime_error("unknown mode '" + s + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// fixed-size scalar record moved through channels (<= 4 fields)
struct ArgRecord {
  std::array<uint64_t, 4> raw{};
};

uint64_t encode_value(const Value& v, Kind k) {
  switch (k) {
    case Kind::Int: return static_cast<uint64_t>(v.i);
    case Kind::Node: return static_cast<uint64_t>(static_cast<int64_t>(v.node));
    case Kind::Real:
    default: {
      double d = v.as_real();
      uint64_t u;
      std::memcpy(&u, &d, sizeof(u));
      return u;
    }
  }
}

Value decode_value(uint64_t raw, Kind k) {
  switch (k) {
    case Kind::Int: return Value::of_int(static_cast<int64_t>(raw));
    case Kind::Node:
      return Value::of_node(static_cast<int32_t>(static_cast<int64_t>(raw)));
    case Kind::Real:
    default: {
      double d;
      std::memcpy(&d, &raw, sizeof(d));
      return Value::of_real(d);
    }
  }
}

std::vector<std::pair<std::string, OutputValue>> collect_outputs(
    const Program& p, const Memory& mem, const std::optional<Value>& ret) {
  std::vector<std::pair<std::string, OutputValue>> out;
  for (size_t g = 0; g < p.globals.size(); ++g) {
    OutputValue ov;
    ov.kind = p.globals[g].elem;
    if (ov.kind == Kind::Int)
      ov.ints = mem.arrays[g].ints;
    else
      ov.reals = mem.arrays[g].reals;
    out.push_back({p.globals[g].name, std::move(ov)});
  }
  if (ret) {
    OutputValue ov;
    ov.scalar = true;
    if (ret->k == Kind::Int) {
      ov.kind = Kind::Int;
      ov.ints.push_back(ret->i);
    } else {
      ov.kind = Kind::Real;
      ov.reals.push_back(ret->as_real());
    }
    out.push_back({"ret", std::move(ov)});
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct WorkerFailure {
  std::mutex mu;
  std::string message;
  std::atomic<bool> failed{false};

  void set(const std::string& who, const std::string& what) {
    std::lock_guard<std::mutex> lk(mu);
    if (!failed.exchange(true)) message = who + ": " + what;
  }
};

// one repetition of a non-degenerate plan
struct PlanRun {
  const PipelinePlan& plan;
  const RunConfig& cfg;
  const Engine& eng;
  Memory& mem;

  int loop_fn = -1;
  std::vector<std::unique_ptr<SpscChannel<ArgRecord>>> channels;
  std::map<std::string, int> channel_idx;
  WorkerFailure failure;
  std::atomic<bool> abort{false};
  std::atomic<int64_t> progress{0};

  // stage-0 side state
  InstrId enqueue_point = kNoInstr;  // record ships when stage 0 gets here
  InstrId header_branch = kNoInstr;
  bool exit_is_then = false;
  std::vector<uint8_t> replaced;
  bool region_done = false;

  // snapshot for the stage-1 worker (plain dswp)
  std::mutex snap_mu;
  std::condition_variable snap_cv;
  bool snap_ready = false;
  std::vector<Value> snapshot;

  std::vector<std::thread> threads;
  std::vector<int64_t> worker_items;

  explicit PlanRun(const PipelinePlan& pl, const RunConfig& c, const Engine& e,
                   Memory& m)
      : plan(pl), cfg(c), eng(e), mem(m) {
    loop_fn = eng.function_index(plan.loop_function);
    for (const auto& ch : plan.channels) {
      channel_idx[ch.name] = static_cast<int>(channels.size());
      channels.push_back(std::make_unique<SpscChannel<ArgRecord>>(
          static_cast<size_t>(ch.capacity)));
    }
  }

  SpscChannel<ArgRecord>& chan(const std::string& name) {
    return *channels[static_cast<size_t>(channel_idx.at(name))];
  }

  const Function& loop_function() const {
    return *plan.transformed.find_function(plan.loop_function);
  }

  void prepare_hooks() {
    const Function& f = loop_function();
    replaced.assign(static_cast<size_t>(f.instr_count), 0);
    if (plan.sliced) {
      replaced[static_cast<size_t>(plan.call_site)] = 1;
      enqueue_point = plan.call_site;
    } else {
      for (InstrId id : plan.stage1_instrs)
        replaced[static_cast<size_t>(id)] = 1;
      enqueue_point = plan.stage1_instrs.front();
    }
    for (InstrId id : plan.deferred_reduction)
      replaced[static_cast<size_t>(id)] = 1;

    const Block* header = f.find_block(plan.loop.header);
    header_branch = header->terminator.id;
    exit_is_then = !plan.loop.body.count(header->terminator.label1);
  }

  void capture_snapshot(const std::vector<Value>& slots) {
    std::lock_guard<std::mutex> lk(snap_mu);
    if (snap_ready) return;
    snapshot = slots;
    snap_ready = true;
    snap_cv.notify_all();
  }

  void release_snapshot_if_pending(const std::vector<Value>& slots) {
    capture_snapshot(slots);
  }

  bool wait_snapshot() {
    std::unique_lock<std::mutex> lk(snap_mu);
    snap_cv.wait(lk, [&] { return snap_ready || abort.load(); });
    return snap_ready;
  }

  // ---- stage-0 hook handlers -----------------------------------------

  void enqueue_sliced(std::vector<Value>& slots) {
    const Function& f = loop_function();
    const Instr* call = f.find_instr(plan.call_site);
    for (const auto& w : plan.slices) {
      const ChannelSpec* spec = nullptr;
      for (const auto& c : plan.channels)
        if (c.name == w.channel) spec = &c;
      ArgRecord rec;
      for (size_t i = 0; i < w.arg_positions.size(); ++i) {
        const Operand& op = call->args[static_cast<size_t>(w.arg_positions[i])];
        Value v;
        if (op.is_var()) {
          int slot = eng.slot_index(loop_fn, op.var);
          v = slot >= 0 ? slots[static_cast<size_t>(slot)]
                        : Value::of_array(eng.global_index(op.var));
        } else if (op.k == Operand::K::IntLit) {
          v = Value::of_int(op.ival);
        } else if (op.k == Operand::K::RealLit) {
          v = Value::of_real(op.rval);
        } else {
          v = Value::of_node(-1);
        }
        rec.raw[i] = encode_value(v, spec->schema[i]);
      }
      if (!chan(w.channel).push(rec, &abort))
        throw std::runtime_error("pipeline aborted while enqueueing");
    }
    progress.fetch_add(1, std::memory_order_relaxed);
  }

  void enqueue_plain(std::vector<Value>& slots) {
    const ChannelSpec* spec = nullptr;
    for (const auto& c : plan.channels)
      if (c.dir == ChannelDir::Forward) spec = &c;
    ArgRecord rec;
    for (size_t i = 0; i < spec->field_vars.size(); ++i) {
      int slot = eng.slot_index(loop_fn, spec->field_vars[i]);
      rec.raw[i] = encode_value(slots[static_cast<size_t>(slot)], spec->schema[i]);
    }
    if (!chan(spec->name).push(rec, &abort))
      throw std::runtime_error("pipeline aborted while enqueueing");
    progress.fetch_add(1, std::memory_order_relaxed);
  }

  // loop exit: close forward channels, drain returns, run the deferred
  // reduction per returned record, join workers
  void on_exit(std::vector<Value>& slots) {
    if (region_done) return;
    region_done = true;
    for (size_t i = 0; i < plan.channels.size(); ++i)
      if (plan.channels[i].dir == ChannelDir::Forward)
        channels[i]->close();

    Engine::Ctx ctx(&mem);
    ctx.fuel = cfg.fuel;
    for (const auto& ch : plan.channels) {
      if (ch.dir != ChannelDir::Return) continue;
      int rslot = eng.slot_index(loop_fn, plan.call_result_var);
      ArgRecord rec;
      for (;;) {
        PopResult r = chan(ch.name).pop(rec, &abort);
        if (r != PopResult::Ok) break;
        slots[static_cast<size_t>(rslot)] = decode_value(rec.raw[0], ch.schema[0]);
        for (InstrId id : plan.deferred_reduction)
          eng.run_one(loop_fn, id, slots, ctx);
        progress.fetch_add(1, std::memory_order_relaxed);
      }
    }
    for (auto& t : threads)
      if (t.joinable()) t.join();
    if (failure.failed.load()) {
      std::lock_guard<std::mutex> lk(failure.mu);
      throw std::runtime_error("worker failed, " + failure.message);
    }
  }

  // ---- workers ---------------------------------------------------------

  void slice_worker(size_t idx) {
    const SliceWorkerSpec& w = plan.slices[idx];
    const std::string who = "slice:" + w.criterion;
    try {
      if (!wait_snapshot()) return;
      const Function& f = loop_function();
      const Instr* call = f.find_instr(plan.call_site);
      int fn = eng.function_index(w.func);
      const Function* sf = plan.transformed.find_function(w.func);
      const ChannelSpec* spec = nullptr;
      for (const auto& c : plan.channels)
        if (c.name == w.channel) spec = &c;

      // static array bindings from the snapshot environment
      std::map<std::string, Value> array_args;
      for (int pos : w.array_arg_positions) {
        const Operand& op = call->args[static_cast<size_t>(pos)];
        Value v;
        int slot = op.is_var() ? eng.slot_index(loop_fn, op.var) : -1;
        if (slot >= 0)
          v = snapshot[static_cast<size_t>(slot)];
        else
          v = Value::of_array(eng.global_index(op.var));
        // callee param name at this position
        const Function* callee = plan.transformed.find_function(plan.sliced_callee);
        array_args[callee->params[static_cast<size_t>(pos)].name] = v;
      }

      Engine::Ctx ctx(&mem);
      ctx.fuel = cfg.fuel;
      ArgRecord rec;
      int64_t items = 0;
      for (;;) {
        PopResult r = chan(w.channel).pop(rec, &abort);
        if (r != PopResult::Ok) break;
        std::vector<Value> args;
        size_t scalar_i = 0;
        for (const auto& prm : sf->params) {
          if (prm.kind == Kind::ArrayRef) {
            args.push_back(array_args.at(prm.name));
          } else {
            args.push_back(decode_value(rec.raw[scalar_i], spec->schema[scalar_i]));
            ++scalar_i;
          }
        }
        auto ret = eng.call(fn, std::move(args), ctx);
        if (w.returns_value) {
          ArgRecord out;
          out.raw[0] = encode_value(*ret, plan.transformed
                                              .find_function(plan.sliced_callee)
                                              ->return_kind.value_or(Kind::Real));
          if (!chan(w.ret_channel).push(out, &abort)) break;
        }
        ++items;
        progress.fetch_add(1, std::memory_order_relaxed);
      }
      worker_items[idx + 1] = items;
    } catch (const std::exception& e) {
      failure.set(who, e.what());
      abort.store(true);
    }
    if (!plan.slices[idx].ret_channel.empty())
      chan(plan.slices[idx].ret_channel).close();
  }

  void stage1_worker() {
    const std::string who = "stage1";
    try {
      if (!wait_snapshot()) return;
      const ChannelSpec* fwd = nullptr;
      const ChannelSpec* ret = nullptr;
      for (const auto& c : plan.channels)
        if (c.dir == ChannelDir::Forward)
          fwd = &c;
        else
          ret = &c;
      Engine::Ctx ctx(&mem);
      ctx.fuel = cfg.fuel;
      int rslot = plan.call_result_var.empty()
                      ? -1
                      : eng.slot_index(loop_fn, plan.call_result_var);
      ArgRecord rec;
      int64_t items = 0;
      for (;;) {
        PopResult r = chan(fwd->name).pop(rec, &abort);
        if (r != PopResult::Ok) break;
        std::vector<Value> slots = snapshot;
        for (size_t i = 0; i < fwd->field_vars.size(); ++i) {
          int slot = eng.slot_index(loop_fn, fwd->field_vars[i]);
          slots[static_cast<size_t>(slot)] = decode_value(rec.raw[i], fwd->schema[i]);
        }
        eng.run_instr_subset(loop_fn, plan.stage1_instrs, slots, ctx);
        if (ret && rslot >= 0) {
          ArgRecord out;
          out.raw[0] = encode_value(slots[static_cast<size_t>(rslot)], ret->schema[0]);
          if (!chan(ret->name).push(out, &abort)) break;
        }
        ++items;
        progress.fetch_add(1, std::memory_order_relaxed);
      }
      worker_items[1] = items;
    } catch (const std::exception& e) {
      failure.set(who, e.what());
      abort.store(true);
    }
    for (const auto& c : plan.channels)
      if (c.dir == ChannelDir::Return) chan(c.name).close();
  }

  // ---- driver ----------------------------------------------------------

  std::optional<Value> run(const WorkloadInput& in) {
    prepare_hooks();
    worker_items.assign(static_cast<size_t>(plan.worker_count), 0);

    if (plan.sliced) {
      for (size_t i = 0; i < plan.slices.size(); ++i)
        threads.emplace_back([this, i] { slice_worker(i); });
    } else {
      threads.emplace_back([this] { stage1_worker(); });
    }

    // watchdog: abort after cfg.watchdog_seconds without progress
    std::mutex wd_mu;
    std::condition_variable wd_cv;
    bool wd_stop = false;
    std::thread watchdog([this, &wd_mu, &wd_cv, &wd_stop] {
      std::unique_lock<std::mutex> lk(wd_mu);
      int64_t last = -1;
      auto last_change = Clock::now();
      while (!wd_stop) {
        wd_cv.wait_for(lk, std::chrono::milliseconds(200));
        if (wd_stop) return;
        int64_t now = progress.load(std::memory_order_relaxed);
        if (now != last) {
          last = now;
          last_change = Clock::now();
        } else if (seconds_since(last_change) > cfg.watchdog_seconds) {
          std::ostringstream s;
          s << "pipeline watchdog: no progress for " << cfg.watchdog_seconds
            << "s; channel stats:";
          for (size_t i = 0; i < channels.size(); ++i)
            s << " " << plan.channels[i].name << "(enq="
              << channels[i]->enqueues() << ",deq=" << channels[i]->dequeues()
              << ",full=" << channels[i]->full_stalls()
              << ",empty=" << channels[i]->empty_stalls() << ")";
          failure.set("watchdog", s.str());
          abort.store(true);
          return;
        }
      }
    });
    auto stop_watchdog = [&] {
      {
        std::lock_guard<std::mutex> lk(wd_mu);
        wd_stop = true;
      }
      wd_cv.notify_all();
      if (watchdog.joinable()) watchdog.join();
    };

    ExecHooks hooks;
    hooks.func = loop_fn;
    hooks.replaced = replaced;
    hooks.on_replaced = [this](InstrId id, std::vector<Value>& slots) {
      // the argument record ships when stage 0 reaches the enqueue point
      // (the sliced call site, or the first stage-1 instruction); all
      // other suppressed instructions run in a worker instead
      if (id != enqueue_point) return;
      release_snapshot_if_pending(slots);
      if (abort.load(std::memory_order_relaxed))
        throw std::runtime_error("pipeline aborted");
      if (plan.sliced)
        enqueue_sliced(slots);
      else
        enqueue_plain(slots);
    };
    hooks.watch_branch = header_branch;
    hooks.exit_is_then = exit_is_then;
    hooks.on_branch_exit = [this](std::vector<Value>& slots) {
      release_snapshot_if_pending(slots);
      on_exit(slots);
    };

    std::optional<Value> ret;
    try {
      Engine::Ctx ctx(&mem);
      ctx.fuel = cfg.fuel;
      ctx.hooks = &hooks;
      std::vector<Value> args =
          const_cast<Engine&>(eng).bind_entry_args(in, mem);
      ret = eng.call(eng.entry_index(), std::move(args), ctx);
    } catch (...) {
      abort.store(true);
      for (auto& c : channels) c->close();
      for (auto& t : threads)
        if (t.joinable()) t.join();
      stop_watchdog();
      if (failure.failed.load()) {
        std::lock_guard<std::mutex> lk(failure.mu);
        throw std::runtime_error("worker failed, " + failure.message);
      }
      throw;
    }
    stop_watchdog();
    if (failure.failed.load()) {
      std::lock_guard<std::mutex> lk(failure.mu);
      throw std::runtime_error("worker failed, " + failure.message);
    }
    return ret;
  }
};

}  // namespace

RunReport execute_sequential(const Program& p, const WorkloadInput& in,
                             const RunConfig& cfg) {
  validate_or_throw(p);
  Engine eng(p);
  RunReport rep;
  rep.mode = "sequential";
  for (int r = 0; r < cfg.repetitions; ++r) {
    Memory mem = eng.make_memory(in);
    Engine::Ctx ctx(&mem);
    ctx.fuel = cfg.fuel;
    auto t0 = Clock::now();
    std::vector<Value> args = eng.bind_entry_args(in, mem);
    auto ret = eng.call(eng.entry_index(), std::move(args), ctx);
    rep.wall_times.push_back(seconds_since(t0));
    if (r == cfg.repetitions - 1)
      rep.outputs = collect_outputs(p, mem, ret);
  }
  rep.median_time = median_of(rep.wall_times);
  return rep;
}

RunReport execute_plan(const PipelinePlan& plan, const WorkloadInput& in,
                       const RunConfig& cfg) {
  if (plan.degenerate) {
    RunReport rep = execute_sequential(plan.transformed, in, cfg);
    rep.mode = "sequential(degenerate)";
    return rep;
  }
  if (cfg.workers < plan.worker_count)
    throw std::runtime_error("plan needs " + std::to_string(plan.worker_count) +
                             " workers, config allows " +
                             std::to_string(cfg.workers));
  if (plan.loop_function != plan.transformed.entry)
    throw std::runtime_error("plan loop must live in the entry function");

  Engine eng(plan.transformed);
  RunReport rep;
  rep.mode = plan.sliced ? "dswp-slice" : "dswp";

  for (int r = 0; r < cfg.repetitions; ++r) {
    Memory mem = eng.make_memory(in);
    PlanRun run(plan, cfg, eng, mem);
    auto t0 = Clock::now();
    auto ret = run.run(in);
    rep.wall_times.push_back(seconds_since(t0));
    if (r == cfg.repetitions - 1) {
      rep.outputs = collect_outputs(plan.transformed, mem, ret);
      rep.items_processed = 0;
      for (size_t i = 0; i < run.channels.size(); ++i) {
        rep.channel_stats.push_back({plan.channels[i].name,
                                     run.channels[i]->enqueues(),
                                     run.channels[i]->dequeues(),
                                     run.channels[i]->full_stalls(),
                                     run.channels[i]->empty_stalls()});
        if (plan.channels[i].dir == ChannelDir::Forward)
          rep.items_processed = std::max(
              rep.items_processed,
              static_cast<int64_t>(run.channels[i]->enqueues()));
      }
    }
  }
  rep.median_time = median_of(rep.wall_times);
  return rep;
}

bool verify_equivalence(const RunReport& a, const RunReport& b, double tol,
                        std::string* diff) {
  bool ok = true;
  auto note = [&](const std::string& s) {
    ok = false;
    if (diff) *diff += s + "\n";
  };
  if (a.outputs.size() != b.outputs.size())
    note("output sets differ in size");
  size_t n = std::min(a.outputs.size(), b.outputs.size());
  for (size_t i = 0; i < n; ++i) {
    const auto& [an, av] = a.outputs[i];
    const auto& [bn, bv] = b.outputs[i];
    if (an != bn) {
      note("output name mismatch: " + an + " vs " + bn);
      continue;
    }
    if (av.kind != bv.kind) {
      note(an + ": kind mismatch");
      continue;
    }
    if (av.kind == Kind::Int) {
      if (av.ints != bv.ints) note(an + ": int values differ");
      continue;
    }
    if (av.reals.size() != bv.reals.size()) {
      note(an + ": length mismatch");
      continue;
    }
    for (size_t k = 0; k < av.reals.size(); ++k) {
      double x = av.reals[k], y = bv.reals[k];
      double m = std::max(std::abs(x), std::abs(y));
      if (m == 0.0) continue;
      if (std::abs(x - y) > tol * m) {
        std::ostringstream s;
        s << an << "[" << k << "]: " << x << " vs " << y;
        note(s.str());
        break;
      }
    }
  }
  return ok;
}

std::string export_json(const RunReport& r) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["wall_times_s"] = r.wall_times;
  j["median_s"] = r.median_time;
  j["items_processed"] = r.items_processed;
  j["channel_stats"] = nlohmann::json::array();
  for (const auto& c : r.channel_stats)
    j["channel_stats"].push_back({{"name", c.name},
                                  {"enqueues", c.enqueues},
                                  {"dequeues", c.dequeues},
                                  {"full_stalls", c.full_stalls},
                                  {"empty_stalls", c.empty_stalls}});
  j["outputs"] = nlohmann::json::object();
  for (const auto& [name, ov] : r.outputs) {
    if (ov.kind == Kind::Int)
      j["outputs"][name] = ov.ints;
    else
      j["outputs"][name] = ov.reals;
  }
  return j.dump(2);
}

}  // namespace pipeslice
