#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "psf/diagnostics.hpp"

namespace psf {

enum class Tok {
  ident,
  number,
  placeholder,  // $1, $2, ...
  lparen,
  rparen,
  lbrace,
  rbrace,
  lbrack,
  rbrack,
  comma,
  colon,
  hash,
  arrow,    // ->
  chan,     // >>
  plus,
  dot,
  merge,    // ||
  bar,      // |
  star,
  equals,
  underscore,
  newline,  // only produced when requested
  eof,
};

const char* describe(Tok t);

struct Token {
  Tok kind = Tok::eof;
  std::string text;
  SourceLoc loc;
};

/// Splits PSF-style source into tokens. "--" starts a comment running to the
/// end of the line. Identifiers may contain '-' (when followed by a letter or
/// digit) and '\''.
std::vector<Token> tokenize(std::string_view src, const std::string& file = {}, bool keep_newlines = false);

/// Cursor over a token vector with the usual expect/accept helpers. Errors
/// carry the location and the set of tokens that would have been accepted.
class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t ahead = 0) const;
  const Token& next();
  bool at(Tok k) const { return peek().kind == k; }
  bool at_word(std::string_view w) const { return peek().kind == Tok::ident && peek().text == w; }
  bool accept(Tok k);
  bool accept_word(std::string_view w);
  const Token& expect(Tok k);
  void expect_word(std::string_view w);
  std::string expect_ident(const char* what = "identifier");

  [[noreturn]] void fail(const std::string& expected) const;
  [[noreturn]] void fail_at(const Token& t, const std::string& message) const;

  std::size_t position() const { return pos_; }
  void reset(std::size_t pos) { pos_ = pos; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace psf
