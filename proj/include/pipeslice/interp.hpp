#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeslice/ir.hpp"

namespace pipeslice {

// ---------------------------------------------------------------------
// Runtime values and memory

struct Value {
  Kind k = Kind::Int;
  int64_t i = 0;   // Int
  double r = 0.0;  // Real
  int32_t node = -1;   // Node (-1 = null)
  int32_t arr = -1;    // ArrayRef (global index / handle)

  static Value of_int(int64_t v) { Value x; x.k = Kind::Int; x.i = v; return x; }
  static Value of_real(double v) { Value x; x.k = Kind::Real; x.r = v; return x; }
  static Value of_node(int32_t n) { Value x; x.k = Kind::Node; x.node = n; return x; }
  static Value of_array(int32_t a) { Value x; x.k = Kind::ArrayRef; x.arr = a; return x; }

  double as_real() const { return k == Kind::Real ? r : static_cast<double>(i); }
};

struct ArrayStorage {
  Kind elem = Kind::Real;
  std::vector<int64_t> ints;
  std::vector<double> reals;

  size_t size() const { return elem == Kind::Int ? ints.size() : reals.size(); }
  bool operator==(const ArrayStorage& o) const = default;
};

struct NodeHeap {
  std::vector<double> data;
  std::vector<int32_t> next;
};

struct Memory {
  std::vector<ArrayStorage> arrays;  // one per program global, decl order
  NodeHeap nodes;
};

// Per-worker view of memory: the node heap and most arrays are shared,
// individual arrays can be redirected to worker-private storage.
struct MemView {
  Memory* base = nullptr;
  std::vector<ArrayStorage*> overrides;  // per global index, null = shared

  explicit MemView(Memory* m) : base(m) {
    overrides.assign(m ? m->arrays.size() : 0, nullptr);
  }
  ArrayStorage& array(int idx) {
    ArrayStorage* o = overrides[static_cast<size_t>(idx)];
    return o ? *o : base->arrays[static_cast<size_t>(idx)];
  }
  const NodeHeap& nodes() const { return base->nodes; }
};

// ---------------------------------------------------------------------
// Inputs and results

struct WorkloadInput {
  std::map<std::string, int64_t> ints;
  std::map<std::string, double> reals;
  // node-kind entry parameters: list node data values, chained in order
  std::map<std::string, std::vector<double>> lists;
  // optional prefill of global arrays
  std::map<std::string, std::vector<double>> global_reals;
  std::map<std::string, std::vector<int64_t>> global_ints;
};

struct OutputValue {
  Kind kind = Kind::Real;  // element kind
  bool scalar = false;
  std::vector<int64_t> ints;
  std::vector<double> reals;

  bool operator==(const OutputValue& o) const = default;
};

struct InterpOptions {
  bool trace = false;
  int64_t fuel = 2'000'000'000;
};

struct ExecutionResult {
  std::vector<std::pair<std::string, OutputValue>> outputs;
  std::vector<std::pair<int, InstrId>> trace;  // (function idx, instr)
  int64_t step_count = 0;
  std::vector<std::vector<int64_t>> per_instr_counts;  // [func][instr id]
};

struct InterpError : std::runtime_error {
  enum class Kind {
    Fuel, DivZero, Bounds, NullDeref, BadInput, CallDepth,
  } kind;
  InterpError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

// ---------------------------------------------------------------------
// Execution engine: name resolution done once, then reusable from any
// worker with its own context.

struct ExecHooks {
  int func = -1;  // function the hooks apply to
  // per InstrId flag; flagged instructions are not executed, the handler
  // runs instead (with the frame's slots for reading argument values)
  std::vector<uint8_t> replaced;
  std::function<void(InstrId, std::vector<Value>&)> on_replaced;
  // per InstrId flag; handler runs first, the instruction still executes
  std::vector<uint8_t> observed;
  std::function<void(InstrId, std::vector<Value>&)> on_observed;
  // fires when `watch_branch` (a CondBr) takes its exit side
  InstrId watch_branch = kNoInstr;
  bool exit_is_then = false;
  std::function<void(std::vector<Value>&)> on_branch_exit;
};

class Engine {
 public:
  explicit Engine(Program p);  // takes ownership; program must validate

  const Program& program() const { return prog_; }
  int function_index(const std::string& name) const;
  int entry_index() const { return entry_; }
  int slot_index(int func, const std::string& var) const;  // -1 unknown
  int slot_count(int func) const;
  int global_index(const std::string& name) const;  // -1 unknown

  Memory make_memory(const WorkloadInput& in) const;
  std::vector<Value> init_slots(int func) const;
  std::vector<Value> bind_entry_args(const WorkloadInput& in, Memory& mem) const;

  struct Counts {
    std::vector<std::vector<int64_t>> per_func;
  };

  struct Ctx {
    MemView mem;
    int64_t fuel = 2'000'000'000;
    Counts* counts = nullptr;
    std::vector<std::pair<int, InstrId>>* trace = nullptr;
    const ExecHooks* hooks = nullptr;
    int call_depth = 0;
    int64_t steps = 0;

    explicit Ctx(Memory* m) : mem(m) {}
    explicit Ctx(MemView v) : mem(std::move(v)) {}
  };

  Counts make_counts() const;

  // Runs `func` with the given argument values; returns its return value.
  std::optional<Value> call(int func, std::vector<Value> args, Ctx& ctx) const;

  // Runs the given non-terminator instructions of `func` (ascending id
  // order) as a straight line against caller-provided slots.
  void run_instr_subset(int func, const std::vector<InstrId>& ids,
                        std::vector<Value>& slots, Ctx& ctx) const;

  // Evaluates a single instruction by original id (used for deferred
  // reduction instructions during return-channel drain).
  void run_one(int func, InstrId id, std::vector<Value>& slots, Ctx& ctx) const;

  ExecutionResult run(const WorkloadInput& in, const InterpOptions& opts) const;

 private:
  struct RArg {
    int slot = -1;  // >= 0: read slot
    Value lit;      // otherwise literal
  };
  struct RInstr {
    Opcode op = Opcode::ConstAssign;
    BinOp bin = BinOp::Add;
    InstrId orig = kNoInstr;
    int dst = -1;
    RArg a, b;
    int arr_global = -1;  // array ops: global index...
    int arr_slot = -1;    // ...or slot holding an array handle
    int callee_fn = -1;
    int intrinsic = -1;  // 0 cos, 1 sin, 2 sqrt
    std::vector<RArg> args;
    int t_target = -1, f_target = -1;  // linear code indices
    bool is_ret = false;
    bool ret_has_value = false;
  };
  struct RFunction {
    std::string name;
    int n_slots = 0;
    int n_params = 0;
    std::vector<Kind> slot_kinds;
    std::map<std::string, int> slot_of;
    std::vector<Kind> param_kinds;
    std::optional<Kind> ret;
    std::vector<RInstr> code;       // linear order
    std::vector<int> code_of_orig;  // InstrId -> code index
    int instr_count = 0;
  };

  RArg resolve_arg(const RFunction& rf, const Operand& o) const;
  void resolve_function(const Function& f, RFunction& rf);
  void exec_rinstr(const RFunction& rf, const RInstr& I, std::vector<Value>& slots,
                   Ctx& ctx, std::optional<Value>* ret, int* next_pc) const;

  Program prog_;
  std::vector<RFunction> funcs_;
  std::map<std::string, int> func_of_;
  std::map<std::string, int> global_of_;
  int entry_ = -1;
};

// One-shot convenience wrapper: validate + engine + run.
ExecutionResult interpret(const Program& p, const WorkloadInput& in,
                          const InterpOptions& opts = {});

}  // namespace pipeslice
