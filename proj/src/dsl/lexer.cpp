#include "dsl/lexer.hpp"

#include <cctype>

#include "fstore/error.hpp"

namespace fstore::dsl::detail {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::string describe(const Token& t) {
  switch (t.kind) {
    case TokenKind::Newline: return "end of line";
    case TokenKind::End: return "end of input";
    default: return "'" + t.text + "'";
  }
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  size_t i = 0;
  auto push = [&](TokenKind kind, std::string s, int c) { out.push_back({kind, std::move(s), line, c}); };

  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      push(TokenKind::Newline, "\n", col);
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      ++col;
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    int start_col = col;
    if (is_word_char(c)) {
      size_t j = i;
      while (j < text.size() && is_word_char(text[j])) ++j;
      // a decimal point is only part of a word for digits.digits literals
      bool all_digits = true;
      for (size_t k = i; k < j; ++k) all_digits &= std::isdigit(static_cast<unsigned char>(text[k])) != 0;
      if (all_digits && j + 1 < text.size() && text[j] == '.' &&
          std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
        j += 1;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        if (j < text.size() && is_word_char(text[j])) {
          throw DslParseError(line, col + static_cast<int>(j - i), {"digit"},
                              "'" + std::string(1, text[j]) + "'");
        }
      }
      push(TokenKind::Word, std::string(text.substr(i, j - i)), start_col);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    TokenKind kind;
    switch (c) {
      case '(': kind = TokenKind::LParen; break;
      case ')': kind = TokenKind::RParen; break;
      case ',': kind = TokenKind::Comma; break;
      case '+': kind = TokenKind::Plus; break;
      case '-': kind = TokenKind::Minus; break;
      case '*': kind = TokenKind::Star; break;
      case '/': kind = TokenKind::Slash; break;
      default:
        throw DslParseError(line, col, {"word", "operator", "parenthesis"},
                            "'" + std::string(1, c) + "'");
    }
    push(kind, std::string(1, c), start_col);
    ++i;
    ++col;
  }
  push(TokenKind::End, "", col);
  return out;
}

}  // namespace fstore::dsl::detail
