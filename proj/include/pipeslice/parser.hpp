#pragma once

#include <stdexcept>
#include <string>

#include "pipeslice/ir.hpp"

namespace pipeslice {

struct ParseError : std::runtime_error {
  int line = 0;
  int col = 0;
  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg + " at " + std::to_string(line_) + ":" +
                           std::to_string(col_)),
        line(line_), col(col_) {}
};

// Parses mini-IR text. Throws ParseError on malformed input, duplicate
// names, or a missing entry function. Variable/call resolution is left
// to validate().
Program parse_program(const std::string& text);

}  // namespace pipeslice
