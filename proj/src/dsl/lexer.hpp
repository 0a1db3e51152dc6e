#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fstore::dsl::detail {

enum class TokenKind { Word, LParen, RParen, Comma, Plus, Minus, Star, Slash, Newline, End };

struct Token {
  TokenKind kind;
  std::string text;
  int line;
  int column;
};

std::vector<Token> tokenize(std::string_view text);
std::string describe(const Token& t);

}  // namespace fstore::dsl::detail
