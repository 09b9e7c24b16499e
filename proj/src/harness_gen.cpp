#include "slicefuzz/harness_gen.hpp"

#include <algorithm>
#include <sstream>

namespace slicefuzz {

namespace {

using Kind = SemanticCType::Kind;

const std::string kRuntime =
#include "harness_runtime_fragment.inc"
    ;

constexpr int kStringArrayMax = 64;
constexpr int kOpaqueBufferBytes = 4096;
constexpr int kMaxStructDepth = 4;

struct PlanFailure {
  std::string reason;
};

std::string unqualified(std::string s) {
  if (starts_with(s, "const ")) s = s.substr(6);
  if (ends_with(s, " const")) s.resize(s.size() - 6);
  if (ends_with(s, "const")) s.resize(s.size() - 5);
  return std::string(trim(s));
}

bool is_value_scalar(const SemanticCType& t) {
  switch (t.kind) {
    case Kind::bool_t:
    case Kind::char_t:
    case Kind::signed_int:
    case Kind::unsigned_int:
    case Kind::floating:
    case Kind::enum_t:
      return t.width > 0 && t.width % 8 == 0;
    default:
      return false;
  }
}

class Planner {
 public:
  explicit Planner(const FileIndex& fi) : fi_(fi) {}

  const RecordDef* record_of(const SemanticCType& t) const {
    if (t.tag.empty()) return nullptr;
    auto it = fi_.records.find(t.tag);
    return it == fi_.records.end() ? nullptr : &it->second;
  }

  ArgPlan value(const CTypePtr& t, const std::string& name, int depth, bool in_struct) {
    ArgPlan p;
    p.ctype = t;
    p.name = name;
    if (is_value_scalar(*t)) {
      p.strategy = Strategy::fixed_width_scalar;
      p.bytes = t->width / 8;
      return p;
    }
    switch (t->kind) {
      case Kind::pointer:
        return pointer(t, name, depth);
      case Kind::function_ptr:
        p.strategy = Strategy::null_pointer;
        p.notes.push_back("function pointer left null");
        return p;
      case Kind::array:
        if (in_struct && t->array_len && t->pointee && is_value_scalar(*t->pointee)) {
          p.strategy = Strategy::fixed_width_scalar;
          p.bytes = static_cast<int>(*t->array_len) * (t->pointee->width / 8);
          p.notes.push_back("array filled with raw bytes");
          return p;
        }
        break;
      case Kind::struct_t: {
        const RecordDef* rec = record_of(*t);
        if (rec && depth < kMaxStructDepth) {
          p.strategy = Strategy::struct_fields;
          for (const auto& f : rec->fields) p.fields.push_back(field(f, depth + 1));
          return p;
        }
        if (!in_struct) throw PlanFailure{"parameter '" + name + "' has an incomplete struct type"};
        break;
      }
      case Kind::union_t:
        if (!in_struct) {
          if (unqualified(t->spelling).empty()) throw PlanFailure{"parameter '" + name + "' has an unnamed union type"};
          p.strategy = Strategy::zeroed_buffer;
          p.bytes = 0;
          p.notes.push_back("unfuzzable field: union zero-initialized");
          return p;
        }
        break;
      default:
        break;
    }
    if (!in_struct) throw PlanFailure{"parameter '" + name + "' has unsupported type '" + t->spelling + "'"};
    p.strategy = Strategy::zeroed_buffer;
    p.skipped = true;
    p.notes.push_back("unfuzzable field: left zero");
    return p;
  }

  ArgPlan pointer(const CTypePtr& t, const std::string& name, int depth) {
    ArgPlan p;
    p.ctype = t;
    p.name = name;
    const CTypePtr& to = t->pointee;
    if (to->is_char_like() && !to->opaque) {
      p.strategy = Strategy::byte_string;
      p.notes.push_back("char pointer treated as terminator-padded byte string");
      return p;
    }
    if (to->kind == Kind::pointer && to->pointee && to->pointee->kind == Kind::char_t) {
      p.strategy = Strategy::string_array;
      return p;
    }
    if (is_value_scalar(*to)) {
      p.strategy = Strategy::fixed_width_scalar;
      p.boxed = true;
      p.bytes = to->width / 8;
      p.notes.push_back("pointer to a single boxed scalar");
      return p;
    }
    if (to->kind == Kind::struct_t) {
      const RecordDef* rec = record_of(*to);
      if (rec && depth < kMaxStructDepth && !unqualified(to->spelling).empty()) {
        p.strategy = Strategy::struct_fields;
        p.boxed = true;
        for (const auto& f : rec->fields) p.fields.push_back(field(f, depth + 1));
        return p;
      }
      p.strategy = Strategy::zeroed_buffer;
      p.bytes = kOpaqueBufferBytes;
      p.notes.push_back(rec ? "nested struct pointer given a zeroed buffer" : "opaque struct: zeroed buffer");
      return p;
    }
    if (to->kind == Kind::union_t || (to->kind == Kind::void_t && to->opaque)) {
      p.strategy = Strategy::zeroed_buffer;
      p.bytes = kOpaqueBufferBytes;
      p.notes.push_back(to->kind == Kind::union_t ? "unfuzzable field: union behind zeroed buffer"
                                                   : "opaque type: zeroed buffer");
      return p;
    }
    p.strategy = Strategy::null_pointer;
    p.notes.push_back("pointer to " + to_string(to->kind) + " left null");
    return p;
  }

  ArgPlan field(const FieldInfo& f, int depth) {
    if (f.bitfield || f.name.empty() || !f.type) {
      ArgPlan p;
      p.ctype = f.type;
      p.name = f.name;
      p.strategy = Strategy::zeroed_buffer;
      p.skipped = true;
      p.notes.push_back(f.bitfield ? "unfuzzable field: bitfield left zero" : "unfuzzable field: anonymous member left zero");
      return p;
    }
    ArgPlan p = value(f.type, f.name, depth, true);
    if (p.strategy == Strategy::struct_fields && p.boxed && depth >= 2) {
      // Pointers inside nested members are not followed further.
      ArgPlan z;
      z.ctype = f.type;
      z.name = f.name;
      z.strategy = Strategy::null_pointer;
      z.notes.push_back("nested struct pointer left null");
      return z;
    }
    return p;
  }

 private:
  const FileIndex& fi_;
};

void count_prefix(const std::vector<ArgPlan>& plans, int& fixed, int& variable_slots, int& count_headers) {
  for (const auto& p : plans) {
    switch (p.strategy) {
      case Strategy::fixed_width_scalar:
        fixed += p.bytes;
        break;
      case Strategy::byte_string:
        ++variable_slots;
        break;
      case Strategy::string_array:
        ++variable_slots;
        ++count_headers;
        break;
      case Strategy::struct_fields:
        count_prefix(p.fields, fixed, variable_slots, count_headers);
        break;
      default:
        break;
    }
  }
}

int count_allocs(const std::vector<ArgPlan>& plans) {
  int n = 0;
  for (const auto& p : plans) {
    switch (p.strategy) {
      case Strategy::fixed_width_scalar:
        n += p.boxed ? 1 : 0;
        break;
      case Strategy::byte_string:
        n += 1;
        break;
      case Strategy::string_array:
        n += 1 + kStringArrayMax;
        break;
      case Strategy::struct_fields:
        n += (p.boxed ? 1 : 0) + count_allocs(p.fields);
        break;
      case Strategy::zeroed_buffer:
        n += p.bytes > 0 && !p.skipped ? 1 : 0;
        break;
      case Strategy::null_pointer:
        break;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Emission

struct VarSlot {
  const ArgPlan* plan;
  std::string dest;
  std::string label;
  int id;
};

class Emitter {
 public:
  std::ostringstream setup, fixed, variable;
  std::vector<VarSlot> slots;
  int total_slots = 0;

  void arg(const ArgPlan& p, int index, std::vector<std::string>& call_args) {
    std::string var = "a" + std::to_string(index);
    std::string label = p.name.empty() ? var : p.name;
    switch (p.strategy) {
      case Strategy::fixed_width_scalar:
        if (p.boxed) {
          setup << "    void *" << var << " = sf_alloc(" << p.bytes << ");\n";
          scalar_into(p, "*(unsigned char *)" + var, var, label, true);
          call_args.push_back("(void *)" + var);
        } else {
          setup << "    " << unqualified(p.ctype->spelling) << " " << var << ";\n";
          scalar_into(p, var, "&" + var, label, false);
          call_args.push_back(var);
        }
        break;
      case Strategy::byte_string:
      case Strategy::string_array:
        setup << "    void *" << var << " = 0;\n";
        slot(p, var, label);
        call_args.push_back("(void *)" + var);
        break;
      case Strategy::struct_fields: {
        const CTypePtr& st = p.boxed ? p.ctype->pointee : p.ctype;
        std::string sname = unqualified(st->spelling);
        if (p.boxed) {
          setup << "    " << sname << " *" << var << " = (" << sname << " *)sf_alloc(sizeof(" << sname << "));\n";
          fields(p.fields, var + "->", label + ".");
          call_args.push_back("(void *)" + var);
        } else {
          setup << "    " << sname << " " << var << ";\n";
          setup << "    __builtin_memset(&" << var << ", 0, sizeof " << var << ");\n";
          fields(p.fields, var + ".", label + ".");
          call_args.push_back(var);
        }
        break;
      }
      case Strategy::null_pointer:
        call_args.push_back("0");
        break;
      case Strategy::zeroed_buffer:
        if (p.bytes > 0) {
          setup << "    void *" << var << " = sf_alloc(" << p.bytes << ");\n";
          call_args.push_back("(void *)" + var);
        } else {
          setup << "    " << unqualified(p.ctype->spelling) << " " << var << ";\n";
          setup << "    __builtin_memset(&" << var << ", 0, sizeof " << var << ");\n";
          call_args.push_back(var);
        }
        break;
    }
  }

 private:
  void scalar_into(const ArgPlan& p, const std::string& lvalue, const std::string& addr, const std::string& label,
                   bool boxed) {
    fixed << "    sf_o = cur.off;\n";
    if (p.ctype && (boxed ? p.ctype->pointee->kind : p.ctype->kind) == Kind::bool_t) {
      fixed << "    sf_take_bytes(&cur, &sf_b, 1);\n";
      fixed << "    " << lvalue << " = sf_b & 1;\n";
    } else {
      if (!boxed && p.ctype->kind != Kind::array) {
        fixed << "    _Static_assert(sizeof(" << lvalue << ") == " << p.bytes << ", \"width of " << label << "\");\n";
      }
      fixed << "    sf_take_bytes(&cur, (void *)" << addr << ", " << p.bytes << ");\n";
    }
    fixed << "    SF_TRACE(\"" << label << "\", (const void *)" << addr << ", " << p.bytes << ", sf_o);\n";
  }

  void slot(const ArgPlan& p, const std::string& dest, const std::string& label) {
    int id = static_cast<int>(slots.size());
    slots.push_back({&p, dest, label, id});
    if (p.strategy == Strategy::string_array) {
      setup << "    sf_u64 sf_cnt" << id << " = 0;\n";
      fixed << "    sf_take_scalar(&cur, 8, &sf_cnt" << id << ");\n";
    }
    if (id + 1 < total_slots) {
      setup << "    sf_u64 sf_hdr" << id << " = 0;\n";
      fixed << "    sf_take_scalar(&cur, 4, &sf_hdr" << id << ");\n";
    }
    std::string len = "sf_len" + std::to_string(id);
    variable << "    sf_o = cur.off;\n";
    if (id + 1 < total_slots) {
      variable << "    sf_size " << len << " = sf_slot_len(&cur, sf_hdr" << id << ");\n";
    } else {
      variable << "    sf_size " << len << " = sf_remaining(&cur);\n";
    }
    if (p.strategy == Strategy::byte_string) {
      variable << "    " << dest << " = (void *)sf_take_cstring(&cur, " << len << ");\n";
      variable << "    SF_TRACE(\"" << label << "\", (const void *)" << dest << ", " << len << ", sf_o);\n";
    } else {
      std::string count = "(sf_size)(1 + sf_cnt" + std::to_string(id) + " % " + std::to_string(kStringArrayMax) + ")";
      variable << "    " << dest << " = (void *)sf_take_string_array(&cur, " << count << ", " << len << ");\n";
      variable << "#ifdef SLICEFUZZ_TRACE\n";
      variable << "    for (sf_size sf_i = 0; ((char **)" << dest << ")[sf_i]; sf_i++)\n";
      variable << "        SF_TRACE(\"" << label << "[]\", ((char **)" << dest << ")[sf_i], " << len << " / " << count
               << ", sf_o);\n";
      variable << "#endif\n";
    }
  }

  void fields(const std::vector<ArgPlan>& fs, const std::string& prefix, const std::string& label_prefix) {
    for (const auto& f : fs) {
      if (f.skipped) continue;
      std::string lv = prefix + f.name;
      std::string label = label_prefix + f.name;
      switch (f.strategy) {
        case Strategy::fixed_width_scalar:
          if (f.boxed) {
            setup << "    " << lv << " = sf_alloc(" << f.bytes << ");\n";
            scalar_into(f, "*(unsigned char *)" + lv, lv, label, true);
          } else {
            scalar_into(f, lv, "&" + lv, label, false);
          }
          break;
        case Strategy::byte_string:
        case Strategy::string_array:
          slot(f, lv, label);
          break;
        case Strategy::struct_fields:
          if (f.boxed) {
            std::string sname = unqualified(f.ctype->pointee->spelling);
            setup << "    " << lv << " = sf_alloc(sizeof(" << sname << "));\n";
            fields(f.fields, "((" + sname + " *)" + lv + ")->", label + ".");
          } else {
            fields(f.fields, lv + ".", label + ".");
          }
          break;
        case Strategy::zeroed_buffer:
          if (f.bytes > 0) setup << "    " << lv << " = sf_alloc(" << f.bytes << ");\n";
          break;
        case Strategy::null_pointer:
          break;
      }
    }
  }
};

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::fixed_width_scalar: return "fixed_width_scalar";
    case Strategy::byte_string: return "byte_string";
    case Strategy::string_array: return "string_array";
    case Strategy::struct_fields: return "struct_fields";
    case Strategy::null_pointer: return "null_pointer";
    case Strategy::zeroed_buffer: return "zeroed_buffer";
  }
  return "null_pointer";
}

const std::string& harness_runtime_source() { return kRuntime; }

int compute_prefix_bytes(const std::vector<ArgPlan>& plans) {
  int fixed = 0, slots = 0, counts = 0;
  count_prefix(plans, fixed, slots, counts);
  return fixed + 8 * counts + 4 * std::max(0, slots - 1);
}

int compute_max_allocations(const std::vector<ArgPlan>& plans) { return count_allocs(plans); }

PlanResult plan_arguments(const FunctionDecl& target, const RepoIndex& idx, bool reads_globals) {
  if (target.variadic) return Unfuzzable{"variadic target"};
  if (target.params.empty() && reads_globals) {
    return Unfuzzable{"zero-information signature: no parameters and the body depends on globals"};
  }
  HarnessSpec spec;
  spec.target = target;
  spec.target_symbol = exported_root_name(target.name);
  Planner planner(idx.unit(target.unit));
  try {
    int i = 0;
    for (const auto& param : target.params) {
      std::string name = param.name.empty() ? "arg" + std::to_string(i) : param.name;
      if (!param.type) throw PlanFailure{"parameter '" + name + "' has no resolved type"};
      spec.arg_plans.push_back(planner.value(param.type, name, 0, false));
      ++i;
    }
  } catch (const PlanFailure& f) {
    return Unfuzzable{f.reason};
  }
  spec.prefix_bytes = compute_prefix_bytes(spec.arg_plans);
  spec.max_allocations = compute_max_allocations(spec.arg_plans);
  return spec;
}

std::string root_prototype(const RepoIndex& idx, const Slice& slice) {
  const FunctionDecl& fn = idx.function(slice.root);
  const FileIndex& fi = idx.unit(slice.root.unit);
  const TopItem& item = fi.items.at(fn.item);
  std::string head(fi.unit->text.substr(item.begin, item.body_begin - item.begin));
  for (auto [b, e] : item.specifier_ranges) {
    if (b < item.begin || e > item.body_begin) continue;
    std::fill(head.begin() + static_cast<long>(b - item.begin), head.begin() + static_cast<long>(e - item.begin), ' ');
  }
  std::string exported = exported_root_name(fn.name);
  if (exported != fn.name) head.replace(item.name_offset - item.begin, fn.name.size(), exported);
  return normalize_whitespace(head) + ";";
}

std::string emit_harness(const HarnessSpec& spec, const Slice& slice, const RepoIndex& idx) {
  const MinimizedFile* root_file = nullptr;
  for (const auto& f : slice.files) {
    if (f.origin_unit == slice.root.unit) root_file = &f;
  }
  if (!root_file) throw Error("emit_harness: slice has no file for the root unit");

  // Prelude: the root file minus everything that is not a type.
  std::vector<std::string> lines = split_lines(root_file->text);
  for (const auto& span : root_file->retained) {
    if (span.external || span.kind == ItemKind::type_def || span.kind == ItemKind::macro_residue) continue;
    for (int l = span.emitted_start; l <= span.emitted_end && l <= static_cast<int>(lines.size()); ++l) {
      if (l >= 1) lines[l - 1].clear();
    }
  }

  std::ostringstream out;
  out << "/* harness for " << spec.target_symbol << " (" << slice.warning.file << ":" << slice.warning.line << ") */\n";
  for (const auto& l : lines) out << l << "\n";
  out << root_prototype(idx, slice) << "\n\n";
  out << "#define SF_MAX_ALLOCS " << std::max(1, spec.max_allocations) << "\n";
  out << kRuntime << "\n";
  out << "#define SF_PREFIX_BYTES " << spec.prefix_bytes << "\n\n";

  Emitter em;
  {
    int fixed = 0, slots = 0, counts = 0;
    count_prefix(spec.arg_plans, fixed, slots, counts);
    em.total_slots = slots;
  }
  std::vector<std::string> call_args;
  for (std::size_t i = 0; i < spec.arg_plans.size(); ++i) {
    em.arg(spec.arg_plans[i], static_cast<int>(i), call_args);
  }

  out << "int LLVMFuzzerTestOneInput(const unsigned char *data, sf_size size)\n{\n";
  out << "    sf_cursor cur;\n    sf_size sf_o = 0;\n    unsigned char sf_b = 0;\n";
  out << "    (void)sf_o;\n    (void)sf_b;\n";
  out << "    if (size < SF_PREFIX_BYTES)\n        return 0;\n";
  out << "    sf_cursor_init(&cur, data, size);\n";
  out << em.setup.str();
  out << "    /* fixed part */\n" << em.fixed.str();
  out << "    /* variable part */\n" << em.variable.str();
  out << "    SF_TRACE_END(&cur);\n";
  out << "    (void)" << spec.target_symbol << "(";
  for (std::size_t i = 0; i < call_args.size(); ++i) out << (i ? ", " : "") << call_args[i];
  out << ");\n";
  out << "    sf_release();\n    return 0;\n}\n";
  return out.str();
}

fs::path write_harness(const HarnessSpec& spec, const Slice& slice, const RepoIndex& idx) {
  fs::path p = slice.workdir / "harness.c";
  write_file(p, emit_harness(spec, slice, idx));
  return p;
}

nlohmann::json to_json(const ArgPlan& plan) {
  nlohmann::json j{{"name", plan.name}, {"strategy", to_string(plan.strategy)}, {"bytes", plan.bytes}};
  if (plan.ctype) j["ctype"] = to_json(*plan.ctype);
  if (plan.boxed) j["boxed"] = true;
  if (plan.skipped) j["skipped"] = true;
  if (!plan.notes.empty()) j["notes"] = plan.notes;
  if (!plan.fields.empty()) {
    j["fields"] = nlohmann::json::array();
    for (const auto& f : plan.fields) j["fields"].push_back(to_json(f));
  }
  return j;
}

nlohmann::json spec_to_json(const HarnessSpec& spec) {
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& p : spec.arg_plans) plans.push_back(to_json(p));
  return {{"target", spec.target.name},
          {"target_symbol", spec.target_symbol},
          {"arg_plans", plans},
          {"prefix_bytes", spec.prefix_bytes},
          {"globals_policy", "zero_init"},
          {"fn_ptr_policy", "null"},
          {"max_allocations", spec.max_allocations}};
}

}  // namespace slicefuzz
