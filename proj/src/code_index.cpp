#include "slicefuzz/code_index.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <functional>
#include <regex>

#include "slicefuzz/parallel.hpp"

namespace slicefuzz {

// ---------------------------------------------------------------------------
// Lexer

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

constexpr std::string_view kPuncts3[] = {"...", "<<=", ">>="};
constexpr std::string_view kPuncts2[] = {"->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
                                         "*=", "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##"};

const std::set<std::string, std::less<>> kKeywords = {
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum", "extern",
    "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return", "short", "signed",
    "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while",
    "_Bool", "_Complex", "_Imaginary", "_Alignas", "_Alignof", "_Atomic", "_Generic", "_Noreturn",
    "_Static_assert", "_Thread_local", "__attribute__", "__attribute", "__asm__", "__asm", "asm", "__inline",
    "__inline__", "__restrict", "__restrict__", "__const", "__const__", "__volatile__", "__volatile",
    "__signed__", "__signed", "__extension__", "__typeof__", "__typeof", "typeof", "__alignof__", "__alignof",
    "__label__", "__thread", "__int128", "__declspec", "__builtin_va_arg", "__builtin_offsetof",
    "__builtin_types_compatible_p", "__builtin_choose_expr", "__builtin_convertvector", "__real__", "__imag__",
    "_Nullable", "_Nonnull", "_Null_unspecified", "__auto_type", "_Float16", "__fp16"};

}  // namespace

bool is_c_keyword(std::string_view word) { return kKeywords.count(word) != 0; }

std::vector<Token> lex_c(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0, n = s.size();
  int line = 1;
  bool line_start = true;
  auto push = [&](TokKind k, std::size_t b, std::size_t e, int l) { out.push_back({k, s.substr(b, e - b), b, l}); };

  while (i < n) {
    char c = s[i];
    if (c == '\n') {
      ++line;
      ++i;
      line_start = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '\\' && i + 1 < n && s[i + 1] == '\n') {
      i += 2;
      ++line;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      i += 2;
      while (i + 1 < n && !(s[i] == '*' && s[i + 1] == '/')) {
        if (s[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 2);
      continue;
    }
    int tok_line = line;
    std::size_t b = i;
    if (c == '#' && line_start) {
      while (i < n && s[i] != '\n') {
        if (s[i] == '\\' && i + 1 < n && s[i + 1] == '\n') {
          ++line;
          ++i;
        }
        ++i;
      }
      push(TokKind::directive, b, i, tok_line);
      continue;
    }
    line_start = false;

    auto lex_quoted = [&](char q) {
      ++i;
      while (i < n && s[i] != q && s[i] != '\n') {
        if (s[i] == '\\' && i + 1 < n) ++i;
        ++i;
      }
      if (i < n && s[i] == q) ++i;
    };

    if (ident_start(c)) {
      while (i < n && ident_char(s[i])) ++i;
      std::string_view word = s.substr(b, i - b);
      if (i < n && (s[i] == '"' || s[i] == '\'') && (word == "L" || word == "u" || word == "U" || word == "u8")) {
        char q = s[i];
        lex_quoted(q);
        push(q == '"' ? TokKind::string : TokKind::character, b, i, tok_line);
      } else {
        push(TokKind::ident, b, i, tok_line);
      }
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      ++i;
      while (i < n) {
        char d = s[i];
        if ((d == '+' || d == '-') && (s[i - 1] == 'e' || s[i - 1] == 'E' || s[i - 1] == 'p' || s[i - 1] == 'P')) {
          ++i;
        } else if (ident_char(d) || d == '.') {
          ++i;
        } else {
          break;
        }
      }
      push(TokKind::number, b, i, tok_line);
      continue;
    }
    if (c == '"' || c == '\'') {
      lex_quoted(c);
      push(c == '"' ? TokKind::string : TokKind::character, b, i, tok_line);
      continue;
    }
    std::size_t len = 1;
    for (auto p : kPuncts3) {
      if (s.substr(i, 3) == p) len = 3;
    }
    if (len == 1) {
      for (auto p : kPuncts2) {
        if (s.substr(i, 2) == p) len = 2;
      }
    }
    i += len;
    push(TokKind::punct, b, i, tok_line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Types

bool SemanticCType::is_scalar() const {
  switch (kind) {
    case Kind::bool_t:
    case Kind::char_t:
    case Kind::signed_int:
    case Kind::unsigned_int:
    case Kind::floating:
    case Kind::enum_t:
      return true;
    default:
      return false;
  }
}

bool SemanticCType::is_char_like() const { return kind == Kind::char_t || kind == Kind::void_t; }

std::string to_string(SemanticCType::Kind kind) {
  using K = SemanticCType::Kind;
  switch (kind) {
    case K::void_t: return "void";
    case K::bool_t: return "bool";
    case K::char_t: return "char";
    case K::signed_int: return "signed_int";
    case K::unsigned_int: return "unsigned_int";
    case K::floating: return "floating";
    case K::enum_t: return "enum_t";
    case K::pointer: return "pointer";
    case K::array: return "array";
    case K::struct_t: return "struct_t";
    case K::union_t: return "union_t";
    case K::function_ptr: return "function_ptr";
    case K::function: return "function";
  }
  return "?";
}

nlohmann::json to_json(const SemanticCType& t) {
  nlohmann::json j{{"kind", to_string(t.kind)}, {"width", t.width}, {"spelling", t.spelling}};
  if (!t.tag.empty()) j["tag"] = t.tag;
  if (!t.alias.empty()) j["alias"] = t.alias;
  if (t.is_unsigned) j["unsigned"] = true;
  if (t.is_const) j["const"] = true;
  if (t.opaque) j["opaque"] = true;
  if (t.array_len) j["array_len"] = *t.array_len;
  if (t.pointee) j["pointee"] = to_json(*t.pointee);
  return j;
}

std::string to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::function_def: return "function_def";
    case ItemKind::declaration: return "declaration";
    case ItemKind::type_def: return "type_def";
    case ItemKind::global_var: return "global_var";
    case ItemKind::raw_block: return "raw_block";
    case ItemKind::macro_residue: return "macro_residue";
  }
  return "?";
}

std::string to_string(SiteKind kind) {
  switch (kind) {
    case SiteKind::function: return "function";
    case SiteKind::global_var: return "global_var";
    case SiteKind::type: return "type";
    case SiteKind::macro_residue: return "macro_residue";
  }
  return "?";
}

namespace {

using Kind = SemanticCType::Kind;

CTypePtr make_type(SemanticCType t) { return std::make_shared<const SemanticCType>(std::move(t)); }

CTypePtr pointer_to(const CTypePtr& target, bool is_const) {
  SemanticCType t;
  t.width = 64;
  t.is_const = is_const;
  t.pointee = target;
  if (target->kind == Kind::function) {
    t.kind = Kind::function_ptr;
    t.spelling = "void *";
  } else {
    t.kind = Kind::pointer;
    t.spelling = target->spelling.empty() ? std::string() : target->spelling + " *";
    if (is_const && !t.spelling.empty()) t.spelling += "const";
  }
  return make_type(std::move(t));
}

CTypePtr with_const(const CTypePtr& t) {
  if (t->is_const) return t;
  SemanticCType c = *t;
  c.is_const = true;
  if (!c.spelling.empty()) {
    if (c.kind == Kind::pointer || c.kind == Kind::function_ptr) {
      c.spelling += " const";
    } else {
      c.spelling = "const " + c.spelling;
    }
  }
  return make_type(std::move(c));
}

struct ParseError {
  std::string message;
};

struct DeclOp {
  enum K { ptr, array, func } k = ptr;
  bool is_const = false;
  std::optional<std::uint64_t> len;
  std::vector<Param> params;
  bool variadic = false;
  bool unprototyped = false;
};

struct Declarator {
  std::string name;
  std::size_t name_tok = static_cast<std::size_t>(-1);
  std::vector<DeclOp> ops;  // from the name outward
};

struct DeclSpecs {
  bool is_typedef = false, is_extern = false, is_static = false, is_inline = false, is_const = false;
  CTypePtr type;
  std::size_t begin_tok = 0, end_tok = 0;  // token range covered
  std::vector<std::size_t> storage_toks;   // static / inline / extern / _Noreturn tokens
};

const std::set<std::string, std::less<>> kTypeKeywords = {
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool", "_Complex",
    "__signed__", "__signed", "__int128", "struct", "union", "enum", "const", "volatile", "restrict",
    "__restrict", "__restrict__", "__const", "__const__", "__volatile__", "__volatile", "_Atomic",
    "__typeof__", "__typeof", "typeof", "_Float16", "__fp16", "__auto_type", "__attribute__", "__attribute"};

class UnitParser {
 public:
  UnitParser(FileIndex& fi, const std::vector<Token>& toks, const std::vector<std::size_t>& match)
      : fi_(fi), toks_(toks), match_(match) {
    static const char* builtin_typedefs[] = {"__builtin_va_list", "__int128_t", "__uint128_t", "__NSConstantString",
                                             "__builtin_ms_va_list", "__bf16"};
    for (const char* name : builtin_typedefs) {
      SemanticCType t;
      t.kind = Kind::void_t;
      t.opaque = true;
      t.alias = name;
      t.spelling = name;
      if (std::string_view(name) == "__int128_t" || std::string_view(name) == "__uint128_t") {
        t.kind = std::string_view(name) == "__int128_t" ? Kind::signed_int : Kind::unsigned_int;
        t.width = 128;
        t.opaque = false;
        t.is_unsigned = t.kind == Kind::unsigned_int;
      }
      fi_.typedefs.emplace(name, make_type(std::move(t)));
    }
  }

  void parse_item(std::size_t first, std::size_t last, std::optional<std::size_t> body_open, TopItem& item) {
    pos_ = first;
    end_ = last + 1;
    item_ = &item;
    const Token& t0 = toks_[first];
    if (t0.kind == TokKind::directive) {
      item.kind = starts_with(t0.text, "#pragma") || starts_with(t0.text, "# pragma") ? ItemKind::macro_residue
                                                                                        : ItemKind::raw_block;
      if (item.kind == ItemKind::raw_block) item.diagnostic = "preprocessor directive residue";
      return;
    }
    if (t0.text == "asm" || t0.text == "__asm__" || t0.text == "__asm") {
      item.kind = ItemKind::raw_block;
      item.diagnostic = "top-level assembly";
      return;
    }
    if (t0.text == "_Static_assert") {
      item.kind = ItemKind::declaration;
      return;
    }
    if (body_open) {
      parse_function_definition(*body_open);
    } else {
      parse_declaration();
    }
  }

  std::optional<std::int64_t> eval_const(std::size_t b, std::size_t e) {
    std::size_t p = b;
    auto v = eval_sum(p, e);
    if (!v || p != e) return std::nullopt;
    return v;
  }

 private:
  FileIndex& fi_;
  const std::vector<Token>& toks_;
  const std::vector<std::size_t>& match_;
  std::size_t pos_ = 0, end_ = 0;
  TopItem* item_ = nullptr;
  std::size_t anon_counter_ = 0;

  bool at_end() const { return pos_ >= end_; }
  std::string_view cur() const { return at_end() ? std::string_view() : toks_[pos_].text; }
  bool is(std::string_view s) const { return !at_end() && toks_[pos_].text == s; }
  [[noreturn]] void fail(const std::string& msg) const {
    int line = at_end() ? toks_[end_ - 1].line : toks_[pos_].line;
    throw ParseError{"line " + std::to_string(line) + ": " + msg};
  }
  void expect(std::string_view s) {
    if (!is(s)) fail("expected '" + std::string(s) + "' before '" + std::string(cur()) + "'");
    ++pos_;
  }
  void skip_group() {
    // pos_ at an opening bracket
    std::size_t m = match_[pos_];
    if (m == static_cast<std::size_t>(-1) || m >= end_) fail("unbalanced brackets");
    pos_ = m + 1;
  }
  bool skip_attributes() {
    bool any = false;
    while (!at_end()) {
      auto c = cur();
      if (c == "__attribute__" || c == "__attribute" || c == "__declspec" || c == "__asm__" || c == "__asm" ||
          c == "asm" || c == "_Alignas") {
        ++pos_;
        if (is("(")) skip_group();
        any = true;
      } else if (c == "__extension__" || c == "_Nullable" || c == "_Nonnull" || c == "_Null_unspecified") {
        ++pos_;
        any = true;
      } else {
        break;
      }
    }
    return any;
  }

  // --- constant expressions -----------------------------------------------
  std::optional<std::int64_t> eval_primary(std::size_t& p, std::size_t e) {
    if (p >= e) return std::nullopt;
    const Token& t = toks_[p];
    if (t.text == "(") {
      ++p;
      auto v = eval_sum(p, e);
      if (p >= e || toks_[p].text != ")") return std::nullopt;
      ++p;
      return v;
    }
    if (t.text == "-") {
      ++p;
      auto v = eval_primary(p, e);
      if (!v) return v;
      return -*v;
    }
    if (t.text == "+") {
      ++p;
      return eval_primary(p, e);
    }
    if (t.kind == TokKind::number) {
      std::string digits(t.text);
      while (!digits.empty() && (digits.back() == 'u' || digits.back() == 'U' || digits.back() == 'l' ||
                                 digits.back() == 'L')) {
        digits.pop_back();
      }
      try {
        std::size_t used = 0;
        auto v = std::stoll(digits, &used, 0);
        if (used != digits.size()) return std::nullopt;
        ++p;
        return v;
      } catch (...) {
        return std::nullopt;
      }
    }
    if (t.kind == TokKind::character && t.text.size() == 3) {
      ++p;
      return static_cast<unsigned char>(t.text[1]);
    }
    if (t.kind == TokKind::ident) {
      auto it = fi_.enum_constants.find(std::string(t.text));
      if (it == fi_.enum_constants.end()) return std::nullopt;
      ++p;
      return it->second;
    }
    return std::nullopt;
  }
  std::optional<std::int64_t> eval_product(std::size_t& p, std::size_t e) {
    auto v = eval_primary(p, e);
    while (v && p < e && (toks_[p].text == "*" || toks_[p].text == "/" || toks_[p].text == "%" ||
                          toks_[p].text == "<<" || toks_[p].text == ">>")) {
      auto op = toks_[p++].text;
      auto r = eval_primary(p, e);
      if (!r) return std::nullopt;
      if (op == "*") v = *v * *r;
      else if (op == "<<") v = *v << *r;
      else if (op == ">>") v = *v >> *r;
      else if (*r == 0) return std::nullopt;
      else if (op == "/") v = *v / *r;
      else v = *v % *r;
    }
    return v;
  }
  std::optional<std::int64_t> eval_sum(std::size_t& p, std::size_t e) {
    auto v = eval_product(p, e);
    while (v && p < e && (toks_[p].text == "+" || toks_[p].text == "-" || toks_[p].text == "|")) {
      auto op = toks_[p++].text;
      auto r = eval_product(p, e);
      if (!r) return std::nullopt;
      v = op == "+" ? *v + *r : op == "-" ? *v - *r : (*v | *r);
    }
    return v;
  }

  // --- specifiers ----------------------------------------------------------
  DeclSpecs parse_specifiers(bool allow_storage) {
    DeclSpecs s;
    s.begin_tok = pos_;
    int n_long = 0;
    bool t_short = false, t_signed = false, t_unsigned = false, t_int = false, t_char = false, t_void = false,
         t_bool = false, t_float = false, t_double = false, t_complex = false, t_int128 = false;
    CTypePtr named;
    bool any = false;
    while (!at_end()) {
      const Token& t = toks_[pos_];
      if (t.kind != TokKind::ident) break;
      std::string_view w = t.text;
      if (w == "typedef" || w == "extern" || w == "static" || w == "auto" || w == "register" ||
          w == "_Thread_local" || w == "__thread" || w == "inline" || w == "__inline" || w == "__inline__" ||
          w == "_Noreturn") {
        if (!allow_storage && w != "register") fail("storage class in this position");
        if (w == "typedef") s.is_typedef = true;
        if (w == "extern") s.is_extern = true;
        if (w == "static") s.is_static = true;
        if (w == "inline" || w == "__inline" || w == "__inline__") s.is_inline = true;
        if (w == "static" || w == "inline" || w == "__inline" || w == "__inline__" || w == "extern") {
          s.storage_toks.push_back(pos_);
        }
        ++pos_;
      } else if (w == "const" || w == "__const" || w == "__const__") {
        s.is_const = true;
        ++pos_;
      } else if (w == "volatile" || w == "__volatile__" || w == "__volatile" || w == "restrict" ||
                 w == "__restrict" || w == "__restrict__") {
        ++pos_;
      } else if (w == "__attribute__" || w == "__attribute" || w == "__declspec" || w == "_Alignas" ||
                 w == "__extension__" || w == "_Nullable" || w == "_Nonnull") {
        skip_attributes();
      } else if (w == "_Atomic" && pos_ + 1 < end_ && toks_[pos_ + 1].text == "(") {
        ++pos_;
        std::size_t b = pos_;
        skip_group();
        named = opaque_type(b);
        any = true;
      } else if (w == "_Atomic") {
        ++pos_;
      } else if (w == "struct" || w == "union") {
        named = parse_record();
        any = true;
      } else if (w == "enum") {
        named = parse_enum();
        any = true;
      } else if (w == "__typeof__" || w == "__typeof" || w == "typeof") {
        std::size_t b = pos_;
        ++pos_;
        if (!is("(")) fail("expected '(' after typeof");
        skip_group();
        named = opaque_type(b);
        any = true;
      } else if (w == "void") { t_void = any = true; ++pos_;
      } else if (w == "char") { t_char = any = true; ++pos_;
      } else if (w == "short") { t_short = any = true; ++pos_;
      } else if (w == "int") { t_int = any = true; ++pos_;
      } else if (w == "long") { ++n_long; any = true; ++pos_;
      } else if (w == "float") { t_float = any = true; ++pos_;
      } else if (w == "double") { t_double = any = true; ++pos_;
      } else if (w == "signed" || w == "__signed__" || w == "__signed") { t_signed = any = true; ++pos_;
      } else if (w == "unsigned") { t_unsigned = any = true; ++pos_;
      } else if (w == "_Bool") { t_bool = any = true; ++pos_;
      } else if (w == "_Complex") { t_complex = any = true; ++pos_;
      } else if (w == "__int128") { t_int128 = any = true; ++pos_;
      } else if (w == "_Float16" || w == "__fp16") { t_float = any = true; ++pos_;
      } else if (!any && fi_.typedefs.count(std::string(w))) {
        SemanticCType t2 = *fi_.typedefs.at(std::string(w));
        t2.alias = std::string(w);
        t2.spelling = std::string(w);
        t2.is_const = false;
        named = make_type(std::move(t2));
        any = true;
        ++pos_;
      } else {
        break;
      }
    }
    s.end_tok = pos_;

    SemanticCType t;
    if (named) {
      t = *named;
    } else if (t_void) {
      t.kind = Kind::void_t;
      t.spelling = "void";
    } else if (t_bool) {
      t.kind = Kind::bool_t;
      t.width = 8;
      t.is_unsigned = true;
      t.spelling = "_Bool";
    } else if (t_char) {
      t.kind = Kind::char_t;
      t.width = 8;
      t.is_unsigned = t_unsigned;
      t.spelling = t_unsigned ? "unsigned char" : t_signed ? "signed char" : "char";
    } else if (t_float || t_double) {
      t.kind = Kind::floating;
      t.width = t_float ? 32 : (n_long ? 128 : 64);
      t.spelling = t_float ? "float" : (n_long ? "long double" : "double");
      if (t_complex) {
        t.width *= 2;
        t.spelling = "_Complex " + t.spelling;
      }
    } else {
      // Integer types; a bare "unsigned"/"signed"/"long" and implicit int included.
      t.kind = t_unsigned ? Kind::unsigned_int : Kind::signed_int;
      t.is_unsigned = t_unsigned;
      std::string base;
      if (t_int128) {
        t.width = 128;
        base = "__int128";
      } else if (t_short) {
        t.width = 16;
        base = "short";
      } else if (n_long >= 2) {
        t.width = 64;
        base = "long long";
      } else if (n_long == 1) {
        t.width = 64;
        base = "long";
      } else {
        t.width = 32;
        base = "int";
      }
      t.spelling = (t_unsigned ? "unsigned " : "") + base;
    }
    (void)t_int;
    CTypePtr result = make_type(std::move(t));
    if (s.is_const) result = with_const(result);
    s.type = result;
    return s;
  }

  CTypePtr opaque_type(std::size_t b) {
    SemanticCType t;
    t.kind = Kind::void_t;
    t.opaque = true;
    std::string text;
    for (std::size_t i = b; i < pos_; ++i) {
      if (!text.empty()) text += ' ';
      text += toks_[i].text;
    }
    t.spelling = text;
    return make_type(std::move(t));
  }

  CTypePtr parse_record() {
    bool is_union = cur() == "union";
    std::size_t kw_tok = pos_;
    ++pos_;
    skip_attributes();
    std::string tag_name;
    if (!at_end() && toks_[pos_].kind == TokKind::ident && !is_c_keyword(cur())) {
      tag_name = std::string(cur());
      ++pos_;
    }
    skip_attributes();
    std::string key;
    if (!tag_name.empty()) {
      key = (is_union ? "union " : "struct ") + tag_name;
    } else {
      key = std::string(is_union ? "union " : "struct ") + "<anon@" + std::to_string(toks_[kw_tok].offset) + ">";
    }
    if (is("{")) {
      std::size_t close = match_[pos_];
      if (close == static_cast<std::size_t>(-1) || close >= end_) fail("unterminated record body");
      RecordDef rec;
      rec.key = key;
      rec.is_union = is_union;
      std::size_t saved_end = end_;
      ++pos_;
      end_ = close;
      while (!at_end()) {
        if (toks_[pos_].kind == TokKind::directive || is(";")) {
          ++pos_;
          continue;
        }
        if (cur() == "_Static_assert") {
          ++pos_;
          if (is("(")) skip_group();
          if (is(";")) ++pos_;
          continue;
        }
        DeclSpecs fs = parse_specifiers(false);
        if (is(";")) {
          // anonymous struct/union member
          rec.fields.push_back({"", fs.type, false});
          ++pos_;
          continue;
        }
        while (true) {
          FieldInfo field;
          if (is(":")) {
            field.bitfield = true;
            field.type = fs.type;
          } else {
            Declarator d = parse_declarator(true);
            field.name = d.name;
            field.type = apply(fs.type, d.ops);
          }
          if (is(":")) {
            field.bitfield = true;
            ++pos_;
            while (!at_end() && !is(",") && !is(";")) {
              if (is("(")) skip_group();
              else ++pos_;
            }
          }
          skip_attributes();
          rec.fields.push_back(std::move(field));
          if (is(",")) {
            ++pos_;
            continue;
          }
          expect(";");
          break;
        }
      }
      end_ = saved_end;
      pos_ = close + 1;
      fi_.records[key] = std::move(rec);
      item_->defines.push_back(key);
    }
    SemanticCType t;
    t.kind = is_union ? Kind::union_t : Kind::struct_t;
    t.tag = key;
    t.spelling = tag_name.empty() ? std::string() : key;
    t.opaque = !fi_.records.count(key);
    return make_type(std::move(t));
  }

  CTypePtr parse_enum() {
    ++pos_;
    skip_attributes();
    std::string tag_name;
    if (!at_end() && toks_[pos_].kind == TokKind::ident && !is_c_keyword(cur())) {
      tag_name = std::string(cur());
      ++pos_;
    }
    skip_attributes();
    if (is(":")) {  // fixed underlying type
      ++pos_;
      parse_specifiers(false);
    }
    if (is("{")) {
      std::size_t close = match_[pos_];
      if (close == static_cast<std::size_t>(-1) || close >= end_) fail("unterminated enum body");
      ++pos_;
      std::int64_t next = 0;
      while (pos_ < close) {
        if (toks_[pos_].kind != TokKind::ident) fail("expected enumerator");
        std::string name(cur());
        ++pos_;
        skip_attributes();
        if (is("=")) {
          ++pos_;
          std::size_t b = pos_;
          int depth = 0;
          while (pos_ < close && !(depth == 0 && is(","))) {
            if (is("(")) ++depth;
            if (is(")")) --depth;
            ++pos_;
          }
          if (auto v = eval_const(b, pos_)) next = *v;
        }
        fi_.enum_constants[name] = next++;
        item_->defines.push_back(name);
        if (is(",")) ++pos_;
      }
      pos_ = close + 1;
      if (!tag_name.empty()) item_->defines.push_back("enum " + tag_name);
    }
    SemanticCType t;
    t.kind = Kind::enum_t;
    t.width = 32;
    t.tag = tag_name.empty() ? std::string() : "enum " + tag_name;
    t.spelling = tag_name.empty() ? "int" : "enum " + tag_name;
    return make_type(std::move(t));
  }

  // --- declarators ---------------------------------------------------------
  bool is_grouping_paren() const {
    // pos_ at '('
    if (pos_ + 1 >= end_) return false;
    const Token& n = toks_[pos_ + 1];
    if (n.text == "*" || n.text == "^" || n.text == "(" || n.text == "[") return true;
    if (n.text == "__attribute__" || n.text == "__attribute") return true;
    if (n.kind == TokKind::ident) {
      if (kTypeKeywords.count(n.text) || fi_.typedefs.count(std::string(n.text))) return false;
      if (n.text == "register" || n.text == "void") return false;
      return !is_c_keyword(n.text);
    }
    return false;
  }

  Declarator parse_declarator(bool allow_abstract) {
    std::vector<DeclOp> ptrs;
    skip_attributes();
    while (is("*") || is("^")) {
      DeclOp op;
      op.k = DeclOp::ptr;
      ++pos_;
      while (!at_end()) {
        auto c = cur();
        if (c == "const" || c == "__const" || c == "__const__") {
          op.is_const = true;
          ++pos_;
        } else if (c == "volatile" || c == "__volatile__" || c == "restrict" || c == "__restrict" ||
                   c == "__restrict__" || c == "_Atomic" || c == "_Nullable" || c == "_Nonnull" ||
                   c == "_Null_unspecified") {
          ++pos_;
        } else if (c == "__attribute__" || c == "__attribute") {
          skip_attributes();
        } else {
          break;
        }
      }
      ptrs.push_back(op);
    }
    Declarator d;
    if (!at_end() && toks_[pos_].kind == TokKind::ident && !is_c_keyword(cur())) {
      d.name = std::string(cur());
      d.name_tok = pos_;
      ++pos_;
    } else if (is("(") && is_grouping_paren()) {
      ++pos_;
      d = parse_declarator(allow_abstract);
      expect(")");
    } else if (!allow_abstract) {
      fail("expected declarator before '" + std::string(cur()) + "'");
    }
    while (!at_end()) {
      if (is("[")) {
        DeclOp op;
        op.k = DeclOp::array;
        std::size_t close = match_[pos_];
        if (close == static_cast<std::size_t>(-1) || close >= end_) fail("unbalanced '['");
        std::size_t b = pos_ + 1;
        while (b < close && (toks_[b].text == "static" || toks_[b].text == "const" || toks_[b].text == "restrict" ||
                             toks_[b].text == "__restrict" || toks_[b].text == "volatile")) {
          ++b;
        }
        if (b < close) {
          if (auto v = eval_const(b, close); v && *v >= 0) op.len = static_cast<std::uint64_t>(*v);
        }
        pos_ = close + 1;
        d.ops.push_back(op);
      } else if (is("(")) {
        d.ops.push_back(parse_params());
      } else if (cur() == "__attribute__" || cur() == "__attribute" || cur() == "__asm__" || cur() == "__asm" ||
                 cur() == "asm") {
        skip_attributes();
      } else {
        break;
      }
    }
    for (auto it = ptrs.rbegin(); it != ptrs.rend(); ++it) d.ops.push_back(*it);
    return d;
  }

  DeclOp parse_params() {
    DeclOp op;
    op.k = DeclOp::func;
    std::size_t close = match_[pos_];
    if (close == static_cast<std::size_t>(-1) || close >= end_) fail("unbalanced '('");
    ++pos_;
    if (pos_ == close) {
      op.unprototyped = true;
      pos_ = close + 1;
      return op;
    }
    if (is("void") && pos_ + 1 == close) {
      pos_ = close + 1;
      return op;
    }
    std::size_t saved_end = end_;
    end_ = close;
    while (!at_end()) {
      if (is("...")) {
        op.variadic = true;
        ++pos_;
        break;
      }
      DeclSpecs ps = parse_specifiers(true);
      Declarator pd = parse_declarator(true);
      CTypePtr pt = apply(ps.type, pd.ops);
      if (pt->kind == Kind::array) {
        pt = pointer_to(pt->pointee, false);
      } else if (pt->kind == Kind::function) {
        pt = pointer_to(pt, false);
      }
      op.params.push_back({pd.name, pt});
      if (is(",")) {
        ++pos_;
        continue;
      }
      if (!at_end()) fail("unexpected '" + std::string(cur()) + "' in parameter list");
    }
    end_ = saved_end;
    pos_ = close + 1;
    return op;
  }

 public:
  static CTypePtr apply(CTypePtr base, const std::vector<DeclOp>& ops) {
    CTypePtr t = std::move(base);
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
      const DeclOp& op = *it;
      if (op.k == DeclOp::ptr) {
        t = pointer_to(t, op.is_const);
      } else if (op.k == DeclOp::array) {
        SemanticCType a;
        a.kind = Kind::array;
        a.width = t->width;
        a.pointee = t;
        a.array_len = op.len;
        a.spelling = t->spelling;
        t = make_type(std::move(a));
      } else {
        SemanticCType f;
        f.kind = Kind::function;
        f.pointee = t;
        for (const auto& p : op.params) f.params.push_back(p.type);
        f.variadic = op.variadic;
        t = make_type(std::move(f));
      }
    }
    return t;
  }

 private:
  std::string token_text(std::size_t b, std::size_t e) const {
    if (b >= e) return {};
    return std::string(fi_.unit->text.substr(toks_[b].offset, toks_[e - 1].offset + toks_[e - 1].text.size() -
                                                                  toks_[b].offset));
  }

  void parse_function_definition(std::size_t body_open) {
    DeclSpecs s = parse_specifiers(true);
    std::size_t decl_begin = pos_;
    Declarator d = parse_declarator(false);
    (void)decl_begin;
    skip_attributes();
    if (pos_ != body_open) fail("unsupported function definition syntax (old-style parameters?)");
    if (d.ops.empty() || d.ops.front().k != DeclOp::func) fail("body follows a non-function declarator");
    const DeclOp& fop = d.ops.front();
    std::vector<DeclOp> ret_ops(d.ops.begin() + 1, d.ops.end());

    FunctionDecl fn;
    fn.name = d.name;
    fn.unit = fi_.unit->id;
    fn.return_type = apply(s.type, ret_ops);
    fn.params = fop.params;
    fn.variadic = fop.variadic;
    fn.unprototyped = fop.unprototyped;
    fn.is_static = s.is_static;
    fn.is_inline = s.is_inline;
    fn.is_definition = true;

    item_->kind = ItemKind::function_def;
    item_->is_static = s.is_static;
    item_->defines.push_back(d.name);
    item_->body_begin = toks_[body_open].offset;
    item_->name_offset = toks_[d.name_tok].offset;
    for (std::size_t t : s.storage_toks) {
      if (toks_[t].text != "extern") item_->specifier_ranges.emplace_back(toks_[t].offset, toks_[t].offset + toks_[t].text.size());
    }
    pending_functions_.push_back(std::move(fn));
  }

  void parse_declaration() {
    DeclSpecs s = parse_specifiers(true);
    std::string spec_text = token_text(s.begin_tok, s.end_tok);
    // Drop storage keywords from the text reused for extern declarations.
    for (std::size_t t : s.storage_toks) {
      std::string kw(toks_[t].text);
      auto p = spec_text.find(kw);
      if (p != std::string::npos) spec_text.erase(p, kw.size());
    }
    bool any_var = false;
    item_->is_static = s.is_static;
    item_->is_typedef = s.is_typedef;
    if (is(";")) {
      ++pos_;
    } else {
      while (true) {
        std::size_t decl_begin = pos_;
        Declarator d = parse_declarator(false);
        std::size_t decl_end = pos_;
        bool has_init = false;
        if (is("=")) {
          has_init = true;
          ++pos_;
          while (!at_end() && !is(",") && !is(";")) {
            if (is("(") || is("{") || is("[")) skip_group();
            else ++pos_;
          }
        }
        CTypePtr type = apply(s.type, d.ops);
        if (s.is_typedef) {
          SemanticCType t = *type;
          t.alias = d.name;
          if (t.spelling.empty() || t.kind == Kind::function_ptr) t.spelling = d.name;
          fi_.typedefs[d.name] = make_type(std::move(t));
          item_->defines.push_back(d.name);
        } else if (type->kind == Kind::function) {
          FunctionDecl fn;
          fn.name = d.name;
          fn.unit = fi_.unit->id;
          fn.return_type = type->pointee;
          const DeclOp& fop = d.ops.front();
          fn.params = fop.params;
          fn.variadic = fop.variadic;
          fn.unprototyped = fop.unprototyped;
          fn.is_static = s.is_static;
          fn.is_inline = s.is_inline;
          fn.is_definition = false;
          pending_functions_.push_back(std::move(fn));
          item_->declares.push_back(d.name);
        } else if (s.is_extern && !has_init) {
          item_->declares.push_back(d.name);
        } else {
          any_var = true;
          item_->defines.push_back(d.name);
          std::string decl = "extern " + std::string(trim(spec_text)) + " " + token_text(decl_begin, decl_end) + ";";
          item_->extern_decl[d.name] = decl;
          const SemanticCType* obj = type.get();
          while (obj->kind == Kind::array && obj->pointee) obj = obj->pointee.get();
          if (!obj->is_const) item_->non_const_global = true;
        }
        if (is(",")) {
          ++pos_;
          continue;
        }
        if (is(";")) {
          ++pos_;
          break;
        }
        fail("expected ',' or ';' after declarator, got '" + std::string(cur()) + "'");
      }
    }
    if (any_var) {
      item_->kind = ItemKind::global_var;
    } else if (!item_->defines.empty()) {
      item_->kind = ItemKind::type_def;
    } else {
      item_->kind = ItemKind::declaration;
    }
  }

 public:
  std::vector<FunctionDecl> pending_functions_;
};

// Matching bracket index for every bracket token (npos when unmatched).
std::vector<std::size_t> match_brackets(const std::vector<Token>& toks) {
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match(toks.size(), npos);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != TokKind::punct) continue;
    char c = toks[i].text[0];
    if (toks[i].text.size() != 1) continue;
    if (c == '(' || c == '[' || c == '{') {
      stack.push_back(i);
    } else if (c == ')' || c == ']' || c == '}') {
      char open = c == ')' ? '(' : c == ']' ? '[' : '{';
      // Tolerate stray closers by unwinding to the nearest matching opener.
      auto it = std::find_if(stack.rbegin(), stack.rend(), [&](std::size_t j) { return toks[j].text[0] == open; });
      if (it == stack.rend()) continue;
      std::size_t j = *it;
      stack.erase(std::next(it).base(), stack.end());
      match[i] = j;
      match[j] = i;
    }
  }
  return match;
}

bool is_attribute_word(std::string_view w) {
  return w == "__attribute__" || w == "__attribute" || w == "__asm__" || w == "__asm" || w == "asm" ||
         w == "__declspec";
}

// Previous significant token before index j, skipping attribute and asm-label groups.
std::optional<std::size_t> prev_significant(const std::vector<Token>& toks, const std::vector<std::size_t>& match,
                                            std::size_t start, std::size_t j) {
  while (j > start) {
    std::size_t k = j - 1;
    if (toks[k].text == ")" && match[k] != static_cast<std::size_t>(-1)) {
      std::size_t open = match[k];
      if (open > start && is_attribute_word(toks[open - 1].text)) {
        j = open - 1;
        continue;
      }
    }
    return k;
  }
  return std::nullopt;
}

struct RawItem {
  std::size_t first = 0, last = 0;
  std::optional<std::size_t> body_open;
};

std::vector<RawItem> split_items(const std::vector<Token>& toks, const std::vector<std::size_t>& match) {
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<RawItem> items;
  std::size_t i = 0, n = toks.size();
  while (i < n) {
    if (toks[i].kind == TokKind::directive) {
      items.push_back({i, i, std::nullopt});
      ++i;
      continue;
    }
    if (toks[i].text == ";") {
      ++i;
      continue;
    }
    RawItem item;
    item.first = i;
    bool saw_eq = false, saw_paren = false, done = false;
    std::size_t j = i;
    while (j < n) {
      const Token& t = toks[j];
      if (t.kind == TokKind::punct && t.text.size() == 1) {
        char c = t.text[0];
        if (c == '(' || c == '[') {
          saw_paren = saw_paren || c == '(';
          j = match[j] == npos ? n - 1 : match[j];
        } else if (c == '=') {
          saw_eq = true;
        } else if (c == '{') {
          auto prev = prev_significant(toks, match, i, j);
          bool body = !saw_eq && saw_paren && prev && toks[*prev].text == ")";
          std::size_t close = match[j] == npos ? n - 1 : match[j];
          if (body) {
            item.body_open = j;
            item.last = close;
            j = close + 1;
            done = true;
            break;
          }
          j = close;
        } else if (c == ';') {
          item.last = j;
          j = j + 1;
          done = true;
          break;
        }
      }
      ++j;
    }
    if (!done) {
      item.last = n - 1;
      j = n;
    }
    items.push_back(item);
    i = j;
  }
  return items;
}

void collect_refs(const std::vector<Token>& toks, std::size_t first, std::size_t last, std::set<std::string>& refs,
                  bool include_strings) {
  static const std::regex kIdent(R"([A-Za-z_][A-Za-z0-9_]*)");
  for (std::size_t i = first; i <= last && i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind == TokKind::string && include_strings) {
      std::string s(t.text);
      // Escapes like "\n" would otherwise glue a letter onto the next word.
      for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        if (s[k] == '\\') s[k] = s[k + 1] = ' ';
      }
      for (auto it = std::sregex_iterator(s.begin(), s.end(), kIdent); it != std::sregex_iterator(); ++it) {
        refs.insert(it->str());
      }
      continue;
    }
    if (t.kind != TokKind::ident) continue;
    if (i > first && (toks[i - 1].text == "." || toks[i - 1].text == "->")) continue;
    if ((t.text == "struct" || t.text == "union" || t.text == "enum") && i + 1 <= last &&
        toks[i + 1].kind == TokKind::ident && !is_c_keyword(toks[i + 1].text)) {
      refs.insert(std::string(t.text) + " " + std::string(toks[i + 1].text));
      ++i;
      continue;
    }
    if (is_c_keyword(t.text)) continue;
    refs.insert(std::string(t.text));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FileIndex

const FunctionDecl* FileIndex::find_definition(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.is_definition && f.name == name) return &f;
  }
  return nullptr;
}

std::string_view FileIndex::item_text(const TopItem& item) const {
  return std::string_view(unit->text).substr(item.begin, item.end - item.begin);
}

std::optional<std::size_t> FileIndex::item_at_line(int pp_line) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].start_line <= pp_line && pp_line <= items[i].end_line) return i;
  }
  return std::nullopt;
}

FileIndex index_unit(const UnitPtr& unit) {
  if (!unit) throw Error("index_unit: null unit");
  FileIndex fi;
  fi.unit = unit;
  if (!unit->ok) {
    fi.diagnostics.push_back("unit not preprocessed: " + std::string(trim(unit->error)).substr(0, 200));
    return fi;
  }
  auto toks = lex_c(unit->text);
  auto match = match_brackets(toks);
  auto raw = split_items(toks, match);
  UnitParser parser(fi, toks, match);

  for (const auto& r : raw) {
    TopItem item;
    item.begin = toks[r.first].offset;
    item.end = toks[r.last].offset + toks[r.last].text.size();
    item.start_line = toks[r.first].line;
    item.end_line = toks[r.last].line + static_cast<int>(std::count(toks[r.last].text.begin(), toks[r.last].text.end(), '\n'));
    if (item.start_line >= 1 && static_cast<std::size_t>(item.start_line) <= unit->line_map.size()) {
      item.external = unit->line_map[static_cast<std::size_t>(item.start_line - 1)].external;
    }
    std::size_t fn_before = parser.pending_functions_.size();
    auto typedefs_before = fi.typedefs;
    try {
      parser.parse_item(r.first, r.last, r.body_open, item);
    } catch (const ParseError& e) {
      parser.pending_functions_.resize(fn_before);
      fi.typedefs = std::move(typedefs_before);
      TopItem rawi;
      rawi.begin = item.begin;
      rawi.end = item.end;
      rawi.start_line = item.start_line;
      rawi.end_line = item.end_line;
      rawi.external = item.external;
      rawi.kind = ItemKind::raw_block;
      rawi.diagnostic = e.message;
      item = std::move(rawi);
      if (!item.external) fi.diagnostics.push_back("raw block at " + e.message);
    }
    collect_refs(toks, r.first, r.last, item.refs, item.kind == ItemKind::raw_block);
    for (const auto& d : item.defines) item.refs.erase(d);
    for (std::size_t k = fn_before; k < parser.pending_functions_.size(); ++k) {
      auto& fn = parser.pending_functions_[k];
      fn.item = fi.items.size();
      fn.start_line = item.start_line;
      fn.end_line = item.end_line;
      if (!item.external) fi.functions.push_back(fn);
    }
    parser.pending_functions_.resize(fn_before);
    fi.items.push_back(std::move(item));
  }
  return fi;
}

// ---------------------------------------------------------------------------
// RepoIndex

RepoIndex::RepoIndex(std::vector<FileIndex> units, fs::path repo_root)
    : units_(std::move(units)), repo_root_(std::move(repo_root)) {
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const auto& fi = units_[u];
    for (std::size_t i = 0; i < fi.items.size(); ++i) {
      const TopItem& item = fi.items[i];
      if (item.external) continue;
      for (const auto& sym : item.defines) {
        DefinitionSite site;
        site.symbol = sym;
        site.unit = u;
        site.item = i;
        site.start_line = item.start_line;
        site.end_line = item.end_line;
        site.is_static = item.is_static && !item.is_typedef;
        if (item.kind == ItemKind::function_def) {
          site.kind = SiteKind::function;
        } else if (item.extern_decl.count(sym)) {
          site.kind = SiteKind::global_var;
        } else {
          site.kind = SiteKind::type;
          site.is_static = false;
        }
        by_symbol_.emplace(sym, std::move(site));
      }
    }
  }
}

const FunctionDecl& RepoIndex::function(const FunctionRef& ref) const {
  return units_.at(ref.unit).functions.at(ref.function);
}

bool RepoIndex::has_definition(std::string_view name) const { return by_symbol_.count(std::string(name)) != 0; }

RepoIndex build_repo_index(const std::vector<UnitPtr>& units, const fs::path& repo_root, int workers) {
  std::vector<FileIndex> files(units.size());
  parallel_for(units.size(), workers, [&](std::size_t i) { files[i] = index_unit(units[i]); });
  return RepoIndex(std::move(files), repo_root);
}

std::optional<std::pair<SourceLocation, SourceLocation>> original_span(const RepoIndex& idx, const FunctionRef& ref) {
  const FileIndex& fi = idx.unit(ref.unit);
  const FunctionDecl& fn = fi.functions.at(ref.function);
  try {
    auto a = map_line(*fi.unit, fn.start_line);
    auto b = map_line(*fi.unit, fn.end_line);
    if (a.external || b.external || a.file != b.file || b.line < a.line) return std::nullopt;
    return std::make_pair(a, b);
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

EnclosingResult enclosing_function(const RepoIndex& idx, const std::string& file, int line) {
  struct Candidate {
    bool same_source;
    std::string source;
    std::size_t unit;
    std::size_t function;
  };
  std::vector<Candidate> found;
  bool present = false;
  std::optional<std::string> raw_diag;

  for (std::size_t u = 0; u < idx.units().size(); ++u) {
    const FileIndex& fi = idx.unit(u);
    if (!fi.unit->ok) continue;
    bool unit_has_line = false;
    for (const auto& loc : fi.unit->line_map) {
      if (!loc.external && loc.line == line && loc.file == file) {
        unit_has_line = true;
        break;
      }
    }
    for (std::size_t f = 0; f < fi.functions.size(); ++f) {
      if (!fi.functions[f].is_definition) continue;
      auto span = original_span(idx, {u, f});
      if (span && span->first.file == file && span->first.line <= line && line <= span->second.line) {
        found.push_back({fi.unit->source_file == file, fi.unit->source_file, u, f});
        unit_has_line = true;
      }
    }
    if (unit_has_line) {
      present = true;
      for (const auto& item : fi.items) {
        if (item.kind != ItemKind::raw_block || item.external) continue;
        try {
          auto a = map_line(*fi.unit, item.start_line);
          auto b = map_line(*fi.unit, item.end_line);
          if (a.file == file && a.line <= line && line <= b.line) {
            raw_diag = "line lies inside an unparsed raw block (" + item.diagnostic + ")";
          }
        } catch (const std::out_of_range&) {
        }
      }
    }
  }

  EnclosingResult result;
  if (!found.empty()) {
    std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(b.same_source, a.source, a.unit) < std::tie(a.same_source, b.source, b.unit);
    });
    result.function = FunctionRef{found.front().unit, found.front().function};
    return result;
  }
  if (!present) {
    result.reason = "excluded: not compiled on this platform";
    return result;
  }
  result.reason = "no enclosing function";
  if (raw_diag) result.diagnostic = *raw_diag;
  return result;
}

CalleeList callees_of(const FunctionDecl& fn, const FileIndex& file) {
  if (!fn.is_definition) throw Error("callees_of: " + fn.name + " is not a definition");
  const TopItem& item = file.items.at(fn.item);
  std::string_view body = std::string_view(file.unit->text).substr(item.body_begin, item.end - item.body_begin);
  auto toks = lex_c(body);
  static const std::set<std::string, std::less<>> kNotCalls = {"sizeof", "__builtin_va_arg", "__builtin_offsetof",
                                                               "__builtin_types_compatible_p", "__builtin_choose_expr",
                                                               "_Generic", "_Alignof", "__alignof__"};
  std::set<std::string> function_names;
  for (const auto& f : file.functions) function_names.insert(f.name);

  CalleeList out;
  std::set<std::string> called, referenced;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind != TokKind::ident || is_c_keyword(t.text) || kNotCalls.count(t.text)) continue;
    if (i > 0 && (toks[i - 1].text == "." || toks[i - 1].text == "->")) continue;
    std::string name(t.text);
    if (i + 1 < toks.size() && toks[i + 1].text == "(") {
      if (called.insert(name).second) out.called.push_back(name);
    } else if (function_names.count(name) && !referenced.count(name)) {
      referenced.insert(name);
    }
  }
  // Preserve first-occurrence order for names never called.
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::string name(toks[i].text);
    if (toks[i].kind == TokKind::ident && referenced.count(name) && !called.count(name)) {
      out.referenced_not_called.push_back(name);
      referenced.erase(name);
    }
  }
  return out;
}

std::vector<DefinitionSite> locate_symbol(const RepoIndex& idx, const std::string& name, std::size_t from_unit) {
  std::vector<DefinitionSite> sites;
  auto [b, e] = idx.by_symbol().equal_range(name);
  for (auto it = b; it != e; ++it) {
    if (it->second.is_static && it->second.unit != from_unit) continue;
    sites.push_back(it->second);
  }
  const auto& from = *idx.unit(from_unit).unit;
  auto from_dir = fs::path(from.source_file).parent_path();
  auto key = [&](const DefinitionSite& s) {
    const auto& u = *idx.unit(s.unit).unit;
    int same_unit = s.unit == from_unit ? 0 : 1;
    int same_dir = fs::path(u.source_file).parent_path() == from_dir ? 0 : 1;
    int same_group = u.origin.link_group == from.origin.link_group ? 0 : 1;
    return std::make_tuple(same_unit, same_dir, same_group, u.source_file, s.unit, s.start_line);
  };
  std::stable_sort(sites.begin(), sites.end(),
                   [&](const DefinitionSite& a, const DefinitionSite& c) { return key(a) < key(c); });
  return sites;
}

nlohmann::json index_to_json(const RepoIndex& idx) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [sym, site] : idx.by_symbol()) {
    j[sym].push_back({{"unit", idx.unit(site.unit).unit->source_file},
                      {"unit_id", site.unit},
                      {"kind", to_string(site.kind)},
                      {"start", site.start_line},
                      {"end", site.end_line}});
  }
  return j;
}

}  // namespace slicefuzz
