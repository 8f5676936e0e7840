#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Core intermediate representation: a small three-address imperative
// language with structured control flow, scalar int/real variables,
// fixed-size global arrays, and singly linked list nodes.
//
// Every instruction and terminator in a function carries a dense InstrId
// (program order). Analyses address instructions by that id.

namespace pipeslice {

using InstrId = int32_t;
constexpr InstrId kNoInstr = -1;

enum class Kind : uint8_t { Int, Real, ArrayRef, Node };

const char* kind_name(Kind k);

enum class BinOp : uint8_t {
  Add, Sub, Mul, Div, Mod,
  Lt, Le, Gt, Ge, Eq, Ne,
};

const char* binop_symbol(BinOp op);
bool binop_is_compare(BinOp op);

enum class Opcode : uint8_t {
  ConstAssign,  // x = <literal>
  Copy,         // x = y
  Neg,          // x = -y
  Bin,          // x = a <op> b
  ArrayLoad,    // x = arr[i]
  ArrayStore,   // arr[i] = v
  LoadData,     // x = n.data
  LoadNext,     // n2 = n.next
  Call,         // [x =] call f(args)
  Jump,         // jump L
  CondBr,       // br c L1 L2
  Ret,          // ret [x]
};

bool opcode_is_terminator(Opcode op);

struct Operand {
  enum class K : uint8_t { None, Var, IntLit, RealLit, NullLit } k = K::None;
  std::string var;     // K::Var
  int64_t ival = 0;    // K::IntLit
  double rval = 0.0;   // K::RealLit

  static Operand make_var(std::string name);
  static Operand make_int(int64_t v);
  static Operand make_real(double v);
  static Operand make_null();

  bool is_var() const { return k == K::Var; }
  bool present() const { return k != K::None; }
  bool operator==(const Operand& o) const;
};

struct Instr {
  InstrId id = kNoInstr;
  Opcode op = Opcode::ConstAssign;

  std::string dst;             // defined variable, empty if none
  Operand a, b;                // operands (meaning depends on op)
  BinOp bin = BinOp::Add;      // Bin only
  std::string array;           // ArrayLoad/ArrayStore: array name
  std::string base;            // LoadData/LoadNext: node variable
  std::string callee;          // Call
  std::vector<Operand> args;   // Call
  std::string label1, label2;  // Jump/CondBr targets

  bool is_terminator() const { return opcode_is_terminator(op); }

  // Variables written / read by this instruction (array and node names
  // included in uses when read as values; array names of stores are not
  // scalar defs).
  std::vector<std::string> defs() const;
  std::vector<std::string> uses() const;

  // Array or field location this instruction may read/write, if any.
  // Field loads touch the distinguished location "$nodes".
  std::optional<std::string> may_touch() const;
  bool touches_write() const;  // may_touch is a write

  std::string text() const;  // canonical one-line form, no indent
  bool operator==(const Instr& o) const;
};

struct Block {
  std::string label;
  std::vector<Instr> instrs;  // no terminators
  Instr terminator;

  bool operator==(const Block& o) const;
};

struct Param {
  std::string name;
  Kind kind = Kind::Int;
  bool operator==(const Param& o) const = default;
};

struct Local {
  std::string name;
  Kind kind = Kind::Int;  // Int, Real or Node
  bool operator==(const Local& o) const = default;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  std::vector<Local> locals;
  std::optional<Kind> return_kind;  // Int or Real
  bool pure = false;
  std::vector<Block> body;

  int instr_count = 0;  // number of InstrIds assigned (instrs + terminators)

  const Block* find_block(const std::string& label) const;
  const Instr* find_instr(InstrId id) const;
  // All instructions including terminators, in id order.
  std::vector<const Instr*> all_instrs() const;

  bool operator==(const Function& o) const;
};

struct GlobalArray {
  std::string name;
  Kind elem = Kind::Real;  // Int or Real
  int64_t length = 0;
  bool operator==(const GlobalArray& o) const = default;
};

struct Program {
  std::vector<GlobalArray> globals;
  std::string entry;  // function name
  std::vector<Function> functions;

  const Function* find_function(const std::string& name) const;
  Function* find_function(const std::string& name);
  const GlobalArray* find_global(const std::string& name) const;

  bool operator==(const Program& o) const;
};

// Intrinsic pure math functions callable without declaration.
bool is_intrinsic(const std::string& name);

// Canonical textual form; parse_program(pretty_print(p)) == p.
std::string pretty_print(const Program& p);
std::string pretty_print(const Function& f);

// Re-assigns dense InstrIds in program order (blocks then terminator,
// per function). Called by the parser and by any pass that builds or
// rewrites functions.
void renumber(Function& f);
void renumber(Program& p);

}  // namespace pipeslice
