#pragma once

// Reasoning-round and query prompt templates, strict parsing of the
// reasoning response, and soft prompt banks (initialization + persistence).

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "steerseg/backend.hpp"
#include "steerseg/container.hpp"
#include "steerseg/errors.hpp"

namespace steerseg::prompting {

inline constexpr std::size_t kMaxAttributes = 10;
inline constexpr const char* kFrameSeedText =
    "focus attention precisely on the referred object region";
inline constexpr const char* kVideoSeedText =
    "track the referred object consistently across frames";

inline constexpr std::string_view kCotTemplate =
    "Expression: {sent}\n"
    "\n"
    "First, briefly reason about which object in the scene best satisfies this "
    "expression \xE2\x80\x94 consider the role, function, or intent the expression "
    "implies, not just visual similarity to the words. Then list distinguishing "
    "attributes (color, size, position, shape, motion) of THAT object only.\n"
    "\n"
    "Respond in EXACTLY this format, nothing else:\n"
    "\n"
    "Reasoning: <one or two short sentences>\n"
    "\n"
    "Attributes: <comma-separated list, max ~10 words, e.g., 'large, white, on "
    "the right, parked'>";

inline constexpr std::string_view kQueryHead = "Expression: {sent}\n\n";
inline constexpr std::string_view kQueryAttributes =
    "Distinguishing attributes of the target: {attrs}.\n\n";
inline constexpr std::string_view kQueryTail =
    "What is the main object (or objects) referred to in the given expression or "
    "question?\n"
    "\n"
    "Use the attributes above to disambiguate from other similar objects. Respond "
    "with a single word (e.g., 'cat', 'person', 'dog') that best describes the "
    "target object(s).";

namespace detail {

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Finds `header` at the start of a line; returns the offset just past it.
inline std::size_t find_header(const std::string& text, std::string_view header) {
  std::size_t pos = 0;
  while ((pos = text.find(header, pos)) != std::string::npos) {
    std::size_t b = pos;
    while (b > 0 && (text[b - 1] == ' ' || text[b - 1] == '\t' || text[b - 1] == '*')) --b;
    if (b == 0 || text[b - 1] == '\n') return pos + header.size();
    pos += header.size();
  }
  return std::string::npos;
}

inline std::string collapse_lines(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline std::string build_cot_prompt(const std::string& expression) {
  require(!detail::trim(expression).empty(), "build_cot_prompt: empty expression");
  return detail::replace_all(std::string(kCotTemplate), "{sent}", expression);
}

inline std::string join_attributes(const std::vector<std::string>& attributes) {
  std::string out;
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (i) out += ", ";
    out += attributes[i];
  }
  return out;
}

/// Query prompt; the attribute line is omitted when `attributes` is empty.
inline std::string build_query_prompt(const std::string& expression,
                                      const std::vector<std::string>& attributes) {
  std::string out = detail::replace_all(std::string(kQueryHead), "{sent}", expression);
  if (!attributes.empty()) {
    out += detail::replace_all(std::string(kQueryAttributes), "{attrs}",
                               join_attributes(attributes));
  }
  out += kQueryTail;
  return out;
}

struct CotResponse {
  std::string reasoning;
  std::vector<std::string> attributes;
};

/// Parses "Reasoning: ..." / "Attributes: a, b, c". Attributes are trimmed,
/// lowercased, deduplicated in order and capped at kMaxAttributes.
inline CotResponse parse_cot_response(const std::string& text) {
  const std::size_t r = detail::find_header(text, "Reasoning:");
  const std::size_t a = detail::find_header(text, "Attributes:");
  if (r == std::string::npos) throw ParseError("response has no 'Reasoning:' line", text);
  if (a == std::string::npos) throw ParseError("response has no 'Attributes:' line", text);

  CotResponse out;
  const std::size_t attr_line = text.rfind('\n', a);
  if (r < a) {
    const std::size_t end = attr_line == std::string::npos || attr_line < r ? a : attr_line;
    out.reasoning = detail::trim(detail::collapse_lines(text.substr(r, end - r)));
  } else {
    out.reasoning = detail::trim(detail::collapse_lines(text.substr(r)));
  }

  std::size_t list_end = text.size();
  if (r > a) list_end = text.rfind('\n', r);
  std::string list = detail::collapse_lines(text.substr(a, list_end - a));

  std::size_t start = 0;
  while (start <= list.size() && out.attributes.size() < kMaxAttributes) {
    std::size_t comma = list.find(',', start);
    if (comma == std::string::npos) comma = list.size();
    std::string item = detail::lower(detail::trim(list.substr(start, comma - start)));
    while (!item.empty() && (item.back() == '.' || item.back() == ';')) item.pop_back();
    item = detail::trim(item);
    if (!item.empty() &&
        std::find(out.attributes.begin(), out.attributes.end(), item) == out.attributes.end()) {
      out.attributes.push_back(std::move(item));
    }
    start = comma + 1;
  }
  if (out.attributes.empty()) throw ParseError("response lists no attributes", text);
  return out;
}

/// Inverse of parse_cot_response for well-formed inputs.
inline std::string render_cot_response(const CotResponse& r) {
  return "Reasoning: " + r.reasoning + "\nAttributes: " + join_attributes(r.attributes);
}

enum class Branch { frame, video };

inline const char* branch_name(Branch b) { return b == Branch::frame ? "frame" : "video"; }

inline Branch parse_branch(const std::string& s) {
  if (s == "frame") return Branch::frame;
  if (s == "video") return Branch::video;
  throw FormatError("unknown prompt branch '" + s + "'");
}

struct SoftPromptBank {
  Branch branch = Branch::frame;
  Matrix embeddings;  // N_p x d
  std::string seed_text;
  long long step = 0;  // optimizer steps applied so far

  std::size_t size() const { return std::size_t(embeddings.rows()); }
  std::size_t dim() const { return std::size_t(embeddings.cols()); }
};

/// Tiles the seed token embeddings end-to-end and truncates to n_p rows.
inline SoftPromptBank init_soft_prompts(Branch branch, const std::string& seed_text,
                                        std::size_t n_p,
                                        const std::function<Matrix(const std::string&)>& embed) {
  require(n_p >= 1, "init_soft_prompts: N_p must be >= 1");
  const Matrix seed = embed(seed_text);
  require(seed.rows() >= 1, "init_soft_prompts: seed text has no tokens");
  SoftPromptBank bank;
  bank.branch = branch;
  bank.seed_text = seed_text;
  bank.embeddings.resize(Eigen::Index(n_p), seed.cols());
  for (std::size_t i = 0; i < n_p; ++i) {
    bank.embeddings.row(Eigen::Index(i)) = seed.row(Eigen::Index(i % std::size_t(seed.rows())));
  }
  return bank;
}

inline SoftPromptBank init_soft_prompts(Branch branch, const std::string& seed_text,
                                        std::size_t n_p, const LanguageBackend& backend) {
  return init_soft_prompts(branch, seed_text, n_p,
                           [&](const std::string& t) { return backend.embed_text(t); });
}

inline constexpr const char* kBankMagic = "steerseg-soft-prompts";

inline container::ArrayContainer bank_to_container(const SoftPromptBank& bank) {
  container::ArrayContainer c;
  c.manifest.set("magic", std::string(kBankMagic));
  c.manifest.set("version", 1);
  c.manifest.set("branch", std::string(branch_name(bank.branch)));
  c.manifest.set("seed_text", bank.seed_text);
  c.manifest.set("n_p", bank.size());
  c.manifest.set("d", bank.dim());
  c.manifest.set("step", bank.step);
  c.manifest.set("dtype", std::string("float32"));
  c.manifest.set("byte_order", std::string("little"));
  std::vector<double> values;
  values.reserve(bank.size() * bank.dim());
  for (Eigen::Index r = 0; r < bank.embeddings.rows(); ++r) {
    for (Eigen::Index k = 0; k < bank.embeddings.cols(); ++k) {
      values.push_back(bank.embeddings(r, k));
    }
  }
  c.put("P", values);
  return c;
}

inline SoftPromptBank bank_from_container(const container::ArrayContainer& c) {
  const auto& m = c.manifest;
  if (!m.has("magic") || m.get("magic") != kBankMagic) {
    throw FormatError("not a soft prompt checkpoint (bad magic)");
  }
  if (m.get_int("version") != 1) throw FormatError("unsupported checkpoint version");
  SoftPromptBank bank;
  bank.branch = parse_branch(m.get("branch"));
  bank.seed_text = m.get("seed_text");
  bank.step = m.get_int("step");
  const long long n = m.get_int("n_p");
  const long long d = m.get_int("d");
  if (n < 1 || d < 1) throw FormatError("checkpoint: invalid shape");
  const auto values = c.get("P");
  if (values.size() != std::size_t(n * d)) {
    throw FormatError("checkpoint: P holds " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(n * d));
  }
  bank.embeddings.resize(n, d);
  for (long long r = 0; r < n; ++r) {
    for (long long k = 0; k < d; ++k) bank.embeddings(r, k) = values[std::size_t(r * d + k)];
  }
  return bank;
}

inline void save_bank(const std::filesystem::path& path, const SoftPromptBank& bank) {
  bank_to_container(bank).save(path);
}

inline SoftPromptBank load_bank(const std::filesystem::path& path) {
  try {
    return bank_from_container(container::ArrayContainer::load(path));
  } catch (const FormatError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace steerseg::prompting
