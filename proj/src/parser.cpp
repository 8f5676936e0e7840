#include "pipeslice/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <set>

namespace pipeslice {

namespace {

struct Token {
  enum class T {
    Ident, Int, Real, Punct, End,
  } t = T::End;
  std::string s;   // ident or punct text
  int64_t ival = 0;
  double rval = 0.0;
  int line = 0, col = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {
    tok_ = scan();
    tok2_ = scan();
  }

  const Token& peek() const { return tok_; }
  const Token& peek2() const { return tok2_; }

  Token next() {
    Token t = tok_;
    tok_ = tok2_;
    tok2_ = scan();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, tok_.line, tok_.col);
  }

 private:
  Token scan() {
    skip_ws();
    tok_cur_ = Token{};
    tok_cur_.line = line_;
    tok_cur_.col = col_;
    if (pos_ >= text_.size()) {
      tok_cur_.t = Token::T::End;
      return tok_cur_;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_'))
        bump();
      tok_cur_.t = Token::T::Ident;
      tok_cur_.s = text_.substr(start, pos_ - start);
      return tok_cur_;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      lex_number();
      return tok_cur_;
    }
    // multi-char punct
    static const char* two[] = {"<=", ">=", "==", "!=", "->"};
    for (const char* p : two) {
      if (text_.compare(pos_, 2, p) == 0) {
        tok_cur_.t = Token::T::Punct;
        tok_cur_.s = p;
        bump();
        bump();
        return tok_cur_;
      }
    }
    tok_cur_.t = Token::T::Punct;
    tok_cur_.s = std::string(1, c);
    bump();
    return tok_cur_;
  }

  void lex_number() {
    size_t start = pos_;
    bool is_real = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        bump();
      } else if (c == '.') {
        is_real = true;
        bump();
      } else if (c == 'e' || c == 'E') {
        is_real = true;
        bump();
        if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-'))
          bump();
      } else {
        break;
      }
    }
    std::string num = text_.substr(start, pos_ - start);
    if (is_real) {
      tok_cur_.t = Token::T::Real;
      tok_cur_.rval = std::strtod(num.c_str(), nullptr);
    } else {
      tok_cur_.t = Token::T::Int;
      tok_cur_.ival = std::strtoll(num.c_str(), nullptr, 10);
    }
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') bump();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_, tok2_, tok_cur_;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) {}

  Program parse() {
    Program p;
    bool entry_declared = false;
    while (lex_.peek().t != Token::T::End) {
      const Token& t = lex_.peek();
      if (t.t != Token::T::Ident) lex_.fail("expected declaration");
      if (t.s == "global") {
        parse_global(p);
      } else if (t.s == "entry") {
        lex_.next();
        p.entry = expect_ident("entry function name");
        entry_declared = true;
      } else if (t.s == "func") {
        parse_function(p);
      } else {
        lex_.fail("expected 'global', 'entry' or 'func'");
      }
    }
    if (!entry_declared) p.entry = "main";
    if (!p.find_function(p.entry))
      throw ParseError("entry not found: " + p.entry, 1, 1);
    renumber(p);
    return p;
  }

 private:
  Lexer lex_;

  std::string expect_ident(const std::string& what) {
    if (lex_.peek().t != Token::T::Ident) lex_.fail("expected " + what);
    return lex_.next().s;
  }

  void expect_punct(const std::string& s) {
    if (lex_.peek().t != Token::T::Punct || lex_.peek().s != s)
      lex_.fail("expected '" + s + "'");
    lex_.next();
  }

  bool accept_punct(const std::string& s) {
    if (lex_.peek().t == Token::T::Punct && lex_.peek().s == s) {
      lex_.next();
      return true;
    }
    return false;
  }

  bool accept_ident(const std::string& s) {
    if (lex_.peek().t == Token::T::Ident && lex_.peek().s == s) {
      lex_.next();
      return true;
    }
    return false;
  }

  Kind parse_kind(bool allow_array) {
    std::string k = expect_ident("type");
    if (k == "int") return Kind::Int;
    if (k == "node") return Kind::Node;
    if (k == "real") {
      if (allow_array && accept_punct("[")) {
        expect_punct("]");
        return Kind::ArrayRef;
      }
      return Kind::Real;
    }
    lex_.fail("unknown type '" + k + "'");
  }

  void parse_global(Program& p) {
    lex_.next();  // global
    GlobalArray g;
    g.name = expect_ident("global name");
    if (p.find_global(g.name))
      lex_.fail("duplicate name: global " + g.name);
    expect_punct(":");
    std::string k = expect_ident("element type");
    if (k == "int")
      g.elem = Kind::Int;
    else if (k == "real")
      g.elem = Kind::Real;
    else
      lex_.fail("global element type must be int or real");
    expect_punct("[");
    if (lex_.peek().t != Token::T::Int) lex_.fail("expected array length");
    g.length = lex_.next().ival;
    expect_punct("]");
    p.globals.push_back(std::move(g));
  }

  void parse_function(Program& p) {
    lex_.next();  // func
    Function f;
    f.name = expect_ident("function name");
    if (p.find_function(f.name))
      lex_.fail("duplicate name: func " + f.name);
    expect_punct("(");
    std::set<std::string> names;
    if (!accept_punct(")")) {
      for (;;) {
        Param prm;
        prm.name = expect_ident("parameter name");
        if (!names.insert(prm.name).second)
          lex_.fail("duplicate name: param " + prm.name);
        expect_punct(":");
        prm.kind = parse_kind(true);
        f.params.push_back(std::move(prm));
        if (accept_punct(")")) break;
        expect_punct(",");
      }
    }
    if (accept_punct("->")) {
      std::string k = expect_ident("return type");
      if (k == "int")
        f.return_kind = Kind::Int;
      else if (k == "real")
        f.return_kind = Kind::Real;
      else
        lex_.fail("return type must be int or real");
    }
    if (accept_ident("pure")) f.pure = true;
    expect_punct("{");
    while (lex_.peek().t == Token::T::Ident && lex_.peek().s == "local") {
      lex_.next();
      Local l;
      l.name = expect_ident("local name");
      if (!names.insert(l.name).second)
        lex_.fail("duplicate name: local " + l.name);
      expect_punct(":");
      l.kind = parse_kind(false);
      f.locals.push_back(std::move(l));
    }
    std::set<std::string> labels;
    while (!accept_punct("}")) {
      Block b = parse_block();
      if (!labels.insert(b.label).second)
        lex_.fail("duplicate name: label " + b.label);
      f.body.push_back(std::move(b));
    }
    if (f.body.empty()) lex_.fail("function body has no blocks");
    p.functions.push_back(std::move(f));
  }

  Block parse_block() {
    Block b;
    b.label = expect_ident("block label");
    expect_punct(":");
    for (;;) {
      Instr i = parse_instr();
      if (i.is_terminator()) {
        b.terminator = std::move(i);
        return b;
      }
      b.instrs.push_back(std::move(i));
    }
  }

  Operand parse_operand() {
    const Token& t = lex_.peek();
    if (t.t == Token::T::Ident) {
      if (t.s == "null") {
        lex_.next();
        return Operand::make_null();
      }
      return Operand::make_var(lex_.next().s);
    }
    if (t.t == Token::T::Int) return Operand::make_int(lex_.next().ival);
    if (t.t == Token::T::Real) return Operand::make_real(lex_.next().rval);
    if (t.t == Token::T::Punct && t.s == "-") {
      lex_.next();
      const Token& n = lex_.peek();
      if (n.t == Token::T::Int) return Operand::make_int(-lex_.next().ival);
      if (n.t == Token::T::Real) return Operand::make_real(-lex_.next().rval);
      lex_.fail("expected number after '-'");
    }
    lex_.fail("expected operand");
  }

  std::optional<BinOp> peek_binop() {
    if (lex_.peek().t != Token::T::Punct) return std::nullopt;
    const std::string& s = lex_.peek().s;
    if (s == "+") return BinOp::Add;
    if (s == "-") return BinOp::Sub;
    if (s == "*") return BinOp::Mul;
    if (s == "/") return BinOp::Div;
    if (s == "%") return BinOp::Mod;
    if (s == "<") return BinOp::Lt;
    if (s == "<=") return BinOp::Le;
    if (s == ">") return BinOp::Gt;
    if (s == ">=") return BinOp::Ge;
    if (s == "==") return BinOp::Eq;
    if (s == "!=") return BinOp::Ne;
    return std::nullopt;
  }

  Instr parse_call(std::string dst) {
    Instr i;
    i.op = Opcode::Call;
    i.dst = std::move(dst);
    i.callee = expect_ident("callee name");
    expect_punct("(");
    if (!accept_punct(")")) {
      for (;;) {
        i.args.push_back(parse_operand());
        if (accept_punct(")")) break;
        expect_punct(",");
      }
    }
    return i;
  }

  Instr parse_instr() {
    const Token& t = lex_.peek();
    if (t.t != Token::T::Ident) lex_.fail("expected instruction");

    if (t.s == "jump") {
      lex_.next();
      Instr i;
      i.op = Opcode::Jump;
      i.label1 = expect_ident("jump target");
      return i;
    }
    if (t.s == "br") {
      lex_.next();
      Instr i;
      i.op = Opcode::CondBr;
      i.a = Operand::make_var(expect_ident("branch variable"));
      i.label1 = expect_ident("then target");
      i.label2 = expect_ident("else target");
      return i;
    }
    if (t.s == "ret") {
      lex_.next();
      Instr i;
      i.op = Opcode::Ret;
      const Token& n = lex_.peek();
      // "ret x" vs a bare "ret" followed by the next block's "label:"
      bool ident_value = n.t == Token::T::Ident &&
                         !(lex_.peek2().t == Token::T::Punct &&
                           lex_.peek2().s == ":");
      bool has_value = ident_value || n.t == Token::T::Int ||
                       n.t == Token::T::Real ||
                       (n.t == Token::T::Punct && n.s == "-");
      if (has_value) i.a = parse_operand();
      return i;
    }
    if (t.s == "call") {
      lex_.next();
      return parse_call("");
    }

    // starts with an identifier: either "x = ..." or "arr[i] = v"
    std::string name = lex_.next().s;
    if (accept_punct("[")) {
      Instr i;
      i.op = Opcode::ArrayStore;
      i.array = std::move(name);
      i.a = parse_operand();
      expect_punct("]");
      expect_punct("=");
      i.b = parse_operand();
      return i;
    }
    expect_punct("=");

    if (lex_.peek().t == Token::T::Ident && lex_.peek().s == "call") {
      lex_.next();
      return parse_call(name);
    }
    if (lex_.peek().t == Token::T::Punct && lex_.peek().s == "-") {
      // negative literal or unary negation of a variable
      lex_.next();
      const Token& n = lex_.peek();
      Instr i;
      i.dst = std::move(name);
      if (n.t == Token::T::Int) {
        i.op = Opcode::ConstAssign;
        i.a = Operand::make_int(-lex_.next().ival);
      } else if (n.t == Token::T::Real) {
        i.op = Opcode::ConstAssign;
        i.a = Operand::make_real(-lex_.next().rval);
      } else {
        i.op = Opcode::Neg;
        i.a = Operand::make_var(expect_ident("operand"));
      }
      return i;
    }

    Operand first = parse_operand();

    // field load: x = n.data / x = n.next
    if (first.is_var() && accept_punct(".")) {
      std::string field = expect_ident("field name");
      Instr i;
      i.dst = std::move(name);
      i.base = first.var;
      if (field == "data")
        i.op = Opcode::LoadData;
      else if (field == "next")
        i.op = Opcode::LoadNext;
      else
        lex_.fail("unknown field '" + field + "' (expected data or next)");
      return i;
    }
    // array load: x = arr[i]
    if (first.is_var() && accept_punct("[")) {
      Instr i;
      i.op = Opcode::ArrayLoad;
      i.dst = std::move(name);
      i.array = first.var;
      i.a = parse_operand();
      expect_punct("]");
      return i;
    }
    // binary op
    if (auto op = peek_binop()) {
      lex_.next();
      Instr i;
      i.op = Opcode::Bin;
      i.bin = *op;
      i.dst = std::move(name);
      i.a = std::move(first);
      i.b = parse_operand();
      return i;
    }
    // copy or const
    Instr i;
    i.dst = std::move(name);
    if (first.is_var() || first.k == Operand::K::NullLit) {
      i.op = first.is_var() ? Opcode::Copy : Opcode::ConstAssign;
    } else {
      i.op = Opcode::ConstAssign;
    }
    i.a = std::move(first);
    return i;
  }

};

}  // namespace

Program parse_program(const std::string& text) {
  Parser p(text);
  return p.parse();
}

}  // namespace pipeslice
