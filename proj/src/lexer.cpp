#include "psf/lexer.hpp"

#include <cctype>

namespace psf {

const char* describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::placeholder: return "placeholder";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lbrack: return "'['";
    case Tok::rbrack: return "']'";
    case Tok::comma: return "','";
    case Tok::colon: return "':'";
    case Tok::hash: return "'#'";
    case Tok::arrow: return "'->'";
    case Tok::chan: return "'>>'";
    case Tok::plus: return "'+'";
    case Tok::dot: return "'.'";
    case Tok::merge: return "'||'";
    case Tok::bar: return "'|'";
    case Tok::star: return "'*'";
    case Tok::equals: return "'='";
    case Tok::underscore: return "'_'";
    case Tok::newline: return "end of line";
    case Tok::eof: return "end of input";
  }
  return "?";
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }

}  // namespace

std::vector<Token> tokenize(std::string_view src, const std::string& file, bool keep_newlines) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto push = [&](Tok k, std::size_t len) {
    out.push_back(Token{k, std::string(src.substr(i, len)), SourceLoc{file, line, col}});
    advance(len);
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      if (keep_newlines && (out.empty() || out.back().kind != Tok::newline)) push(Tok::newline, 1);
      else advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    std::string_view rest = src.substr(i);
    if (rest.starts_with("->")) { push(Tok::arrow, 2); continue; }
    if (rest.starts_with(">>")) { push(Tok::chan, 2); continue; }
    if (rest.starts_with("||")) { push(Tok::merge, 2); continue; }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t n = 0;
      while (n < rest.size() && std::isdigit(static_cast<unsigned char>(rest[n]))) ++n;
      bool word = n < rest.size() && (ident_char(rest[n]) && !std::isdigit(static_cast<unsigned char>(rest[n])));
      if (!word) {
        push(Tok::number, n);
        continue;
      }
    }
    if (c == '$') {
      std::size_t n = 1;
      while (n < rest.size() && std::isdigit(static_cast<unsigned char>(rest[n]))) ++n;
      if (n == 1) throw Error(SourceLoc{file, line, col}, "expected digits after '$'");
      push(Tok::placeholder, n);
      continue;
    }
    if (c == '_' && (rest.size() == 1 || !ident_char(rest[1]))) {
      push(Tok::underscore, 1);
      continue;
    }
    if (ident_start(c) || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t n = 1;
      while (n < rest.size()) {
        if (ident_char(rest[n])) {
          ++n;
        } else if (rest[n] == '-' && n + 1 < rest.size() && std::isalnum(static_cast<unsigned char>(rest[n + 1]))) {
          n += 2;
        } else {
          break;
        }
      }
      push(Tok::ident, n);
      continue;
    }
    switch (c) {
      case '(': push(Tok::lparen, 1); continue;
      case ')': push(Tok::rparen, 1); continue;
      case '{': push(Tok::lbrace, 1); continue;
      case '}': push(Tok::rbrace, 1); continue;
      case '[': push(Tok::lbrack, 1); continue;
      case ']': push(Tok::rbrack, 1); continue;
      case ',': push(Tok::comma, 1); continue;
      case ':': push(Tok::colon, 1); continue;
      case '#': push(Tok::hash, 1); continue;
      case '+': push(Tok::plus, 1); continue;
      case '.': push(Tok::dot, 1); continue;
      case '|': push(Tok::bar, 1); continue;
      case '*': push(Tok::star, 1); continue;
      case '=': push(Tok::equals, 1); continue;
      default: break;
    }
    throw Error(SourceLoc{file, line, col}, std::string("unexpected character '") + c + "'");
  }
  out.push_back(Token{Tok::eof, {}, SourceLoc{file, line, col}});
  return out;
}

const Token& TokenStream::peek(std::size_t ahead) const {
  std::size_t k = pos_ + ahead;
  return k < toks_.size() ? toks_[k] : toks_.back();
}

const Token& TokenStream::next() {
  const Token& t = peek();
  if (pos_ + 1 < toks_.size()) ++pos_;
  return t;
}

bool TokenStream::accept(Tok k) {
  if (!at(k)) return false;
  next();
  return true;
}

bool TokenStream::accept_word(std::string_view w) {
  if (!at_word(w)) return false;
  next();
  return true;
}

const Token& TokenStream::expect(Tok k) {
  if (!at(k)) fail(describe(k));
  return next();
}

void TokenStream::expect_word(std::string_view w) {
  if (!at_word(w)) fail("'" + std::string(w) + "'");
  next();
}

std::string TokenStream::expect_ident(const char* what) {
  if (!at(Tok::ident)) fail(what);
  return next().text;
}

void TokenStream::fail(const std::string& expected) const {
  const Token& t = peek();
  std::string found = t.kind == Tok::eof ? "end of input" : "'" + t.text + "'";
  if (t.kind == Tok::newline) found = "end of line";
  throw Error(t.loc, "syntax error: expected " + expected + ", found " + found);
}

void TokenStream::fail_at(const Token& t, const std::string& message) const { throw Error(t.loc, message); }

}  // namespace psf
