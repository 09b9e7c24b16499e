#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/build_capture.hpp"

namespace slicefuzz {

// ---------------------------------------------------------------------------
// Lexing

enum class TokKind { ident, number, string, character, punct, directive };

struct Token {
  TokKind kind;
  std::string_view text;
  std::size_t offset = 0;  // byte offset into the lexed text
  int line = 0;            // 1-based
};

/// Tokenizes C text. Comments are skipped; a '#' at the start of a line
/// yields one directive token covering the whole (continued) line.
std::vector<Token> lex_c(std::string_view text);

bool is_c_keyword(std::string_view word);

// ---------------------------------------------------------------------------
// Types

struct SemanticCType;
using CTypePtr = std::shared_ptr<const SemanticCType>;

struct SemanticCType {
  enum class Kind {
    void_t, bool_t, char_t, signed_int, unsigned_int, floating, enum_t,
    pointer, array, struct_t, union_t, function_ptr,
    function,  // bare function type; only seen on declarators and as a function_ptr pointee
  };
  Kind kind = Kind::void_t;
  int width = 0;  // bits; pointers are 64, arrays width of one element
  bool is_unsigned = false;
  bool is_const = false;
  bool opaque = false;  // struct/union without a visible definition
  std::string tag;      // "struct pair", "union u", "enum e"; synthesized for anonymous records
  std::string alias;    // typedef name the type was spelled with, if any
  std::string spelling; // C type name usable in a declaration
  CTypePtr pointee;     // pointer target, array element, function return type
  std::optional<std::uint64_t> array_len;
  std::vector<CTypePtr> params;  // function
  bool variadic = false;          // function

  bool is_scalar() const;
  bool is_char_like() const;  // char, signed char, unsigned char, void
};

std::string to_string(SemanticCType::Kind kind);
nlohmann::json to_json(const SemanticCType& type);

struct FieldInfo {
  std::string name;  // empty for anonymous members
  CTypePtr type;
  bool bitfield = false;
};

struct RecordDef {
  std::string key;  // "struct pair"
  bool is_union = false;
  std::vector<FieldInfo> fields;
};

// ---------------------------------------------------------------------------
// Per-unit index

enum class ItemKind { function_def, declaration, type_def, global_var, raw_block, macro_residue };
std::string to_string(ItemKind kind);

/// One top-level construct of a unit, in source order.
struct TopItem {
  ItemKind kind = ItemKind::raw_block;
  std::size_t begin = 0, end = 0;  // byte range in the unit text
  int start_line = 0, end_line = 0;  // pp lines, inclusive
  bool external = false;  // originates from a system header
  bool is_static = false;
  bool is_typedef = false;
  std::vector<std::string> defines;   // symbols this item defines (tags as "struct X")
  std::vector<std::string> declares;  // prototypes and extern declarations
  std::set<std::string> refs;         // identifiers and tags used anywhere in the item
  std::size_t body_begin = 0;         // function_def: offset of the opening brace
  /// Byte ranges of storage/inline specifiers (function_def), for blanking.
  std::vector<std::pair<std::size_t, std::size_t>> specifier_ranges;
  std::size_t name_offset = 0;  // function_def: offset of the function name token
  /// For global variables: text of an extern declaration for each name.
  std::map<std::string, std::string> extern_decl;
  bool non_const_global = false;  // global_var with at least one mutable object
  std::string diagnostic;         // raw_block: why it could not be parsed
};

struct Param {
  std::string name;  // may be empty
  CTypePtr type;
};

struct FunctionDecl {
  std::string name;
  std::size_t unit = 0;
  int start_line = 0, end_line = 0;  // pp lines
  CTypePtr return_type;
  std::vector<Param> params;
  bool variadic = false;
  bool unprototyped = false;  // declared with ()
  bool is_static = false;
  bool is_inline = false;
  bool is_definition = false;
  std::size_t item = 0;  // index into FileIndex::items
};

struct FileIndex {
  UnitPtr unit;
  std::vector<TopItem> items;
  std::vector<FunctionDecl> functions;  // definitions and prototypes, source order
  std::map<std::string, RecordDef> records;
  std::map<std::string, CTypePtr> typedefs;
  std::map<std::string, std::int64_t> enum_constants;
  std::vector<std::string> diagnostics;

  const FunctionDecl* find_definition(std::string_view name) const;
  std::string_view item_text(const TopItem& item) const;
  /// Index of the item whose pp line range contains `pp_line`.
  std::optional<std::size_t> item_at_line(int pp_line) const;
};

/// Parses one preprocessed unit. Unparseable regions become raw_block items.
FileIndex index_unit(const UnitPtr& unit);

// ---------------------------------------------------------------------------
// Repository index

enum class SiteKind { function, global_var, type, macro_residue };
std::string to_string(SiteKind kind);

struct DefinitionSite {
  std::string symbol;
  SiteKind kind = SiteKind::function;
  std::size_t unit = 0;
  std::size_t item = 0;
  int start_line = 0, end_line = 0;
  bool is_static = false;
};

struct FunctionRef {
  std::size_t unit = 0;
  std::size_t function = 0;  // index into FileIndex::functions
  bool operator==(const FunctionRef&) const = default;
};

class RepoIndex {
 public:
  RepoIndex() = default;
  RepoIndex(std::vector<FileIndex> units, fs::path repo_root);

  const std::vector<FileIndex>& units() const { return units_; }
  const FileIndex& unit(std::size_t i) const { return units_.at(i); }
  const fs::path& repo_root() const { return repo_root_; }
  const std::multimap<std::string, DefinitionSite>& by_symbol() const { return by_symbol_; }
  const FunctionDecl& function(const FunctionRef& ref) const;

  /// True when some unit defines `name` (any kind, static or not).
  bool has_definition(std::string_view name) const;

 private:
  std::vector<FileIndex> units_;
  fs::path repo_root_;
  std::multimap<std::string, DefinitionSite> by_symbol_;
};

RepoIndex build_repo_index(const std::vector<UnitPtr>& units, const fs::path& repo_root, int workers = 1);

struct EnclosingResult {
  std::optional<FunctionRef> function;
  /// When no function: "no enclosing function" or "excluded: not compiled on this platform".
  std::string reason;
  std::string diagnostic;
};

/// Finds the definition containing original-source (file, line).
EnclosingResult enclosing_function(const RepoIndex& idx, const std::string& file, int line);

/// Original-coordinate range of a definition (first and last mapped lines).
std::optional<std::pair<SourceLocation, SourceLocation>> original_span(const RepoIndex& idx, const FunctionRef& fn);

struct CalleeList {
  std::vector<std::string> called;
  std::vector<std::string> referenced_not_called;  // function names used as values
};

CalleeList callees_of(const FunctionDecl& fn, const FileIndex& file);

/// Definition sites for `name` visible from `from_unit`: same unit, then
/// same directory, then same link group, then lexicographic path.
std::vector<DefinitionSite> locate_symbol(const RepoIndex& idx, const std::string& name, std::size_t from_unit);

/// Debug dump: symbol -> [{unit, kind, start, end}].
nlohmann::json index_to_json(const RepoIndex& idx);

}  // namespace slicefuzz
