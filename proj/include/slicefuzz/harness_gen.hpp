#pragma once

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "slicefuzz/code_index.hpp"
#include "slicefuzz/slicer.hpp"

namespace slicefuzz {

enum class Strategy { fixed_width_scalar, byte_string, string_array, struct_fields, null_pointer, zeroed_buffer };
std::string to_string(Strategy s);

struct ArgPlan {
  CTypePtr ctype;
  Strategy strategy = Strategy::null_pointer;
  std::string name;  // parameter or field name
  /// fixed_width_scalar: bytes consumed. zeroed_buffer: bytes allocated
  /// (0 for a by-value object that is only zero-initialized).
  int bytes = 0;
  /// fixed_width_scalar / struct_fields: the value sits behind one
  /// allocation and the argument is a pointer to it.
  bool boxed = false;
  bool skipped = false;  // struct member left zeroed (bitfield, union, anonymous)
  std::vector<ArgPlan> fields;  // struct_fields
  std::vector<std::string> notes;
};

enum class GlobalsPolicy { zero_init };
enum class FnPtrPolicy { null };

struct HarnessSpec {
  FunctionDecl target;
  std::string target_symbol;  // name the harness calls
  std::vector<ArgPlan> arg_plans;
  int prefix_bytes = 0;
  GlobalsPolicy globals_policy = GlobalsPolicy::zero_init;
  FnPtrPolicy fn_ptr_policy = FnPtrPolicy::null;
  int max_allocations = 0;
};

struct Unfuzzable {
  std::string reason;
};

using PlanResult = std::variant<HarnessSpec, Unfuzzable>;

/// Chooses a decoding strategy per parameter. `reads_globals` marks targets
/// whose only inputs may be globals (relevant for empty signatures).
PlanResult plan_arguments(const FunctionDecl& target, const RepoIndex& idx, bool reads_globals = false);

/// Size headers, count headers and fixed-width scalars, from the plans alone.
int compute_prefix_bytes(const std::vector<ArgPlan>& plans);
int compute_max_allocations(const std::vector<ArgPlan>& plans);

/// The C runtime (byte cursor, allocation tracker) pasted into harnesses.
const std::string& harness_runtime_source();

/// Prototype of the root definition as emitted in the slice (specifiers
/// blanked, main renamed).
std::string root_prototype(const RepoIndex& idx, const Slice& slice);

/// Full harness source for a compiled slice.
std::string emit_harness(const HarnessSpec& spec, const Slice& slice, const RepoIndex& idx);
/// Writes <slice workdir>/harness.c and returns its path.
fs::path write_harness(const HarnessSpec& spec, const Slice& slice, const RepoIndex& idx);

nlohmann::json to_json(const ArgPlan& plan);
nlohmann::json spec_to_json(const HarnessSpec& spec);

}  // namespace slicefuzz
