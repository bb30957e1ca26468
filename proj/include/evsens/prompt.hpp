#pragma once

// Structured prompt protocol: one system template and one user template.
// Templates are plain-text files named <template_id>.txt with {name}
// placeholders drawn from a fixed set.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsens/error.hpp"
#include "evsens/format.hpp"
#include "evsens/hash.hpp"
#include "evsens/study.hpp"

namespace evsens {

inline constexpr std::array<std::string_view, 5> kPlaceholders = {
    "exposure", "outcome", "confounders", "measure", "effect_value"};

enum class PromptRole { System, User };

class PromptTemplate {
 public:
  PromptTemplate(std::string template_id, PromptRole role, std::string body)
      : id_(std::move(template_id)), role_(role), body_(std::move(body)) {
    for (const auto& name : placeholders()) {
      if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) ==
          kPlaceholders.end()) {
        throw Error(ErrorKind::TemplateError,
                    "template '" + id_ + "' uses unknown placeholder {" + name + "}");
      }
    }
  }

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] PromptRole role() const noexcept { return role_; }
  [[nodiscard]] const std::string& body() const noexcept { return body_; }

  /// Placeholder names in order of appearance (with repeats).
  [[nodiscard]] std::vector<std::string> placeholders() const {
    static const std::regex re(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::vector<std::string> out;
    for (std::sregex_iterator it(body_.begin(), body_.end(), re), end; it != end; ++it) {
      out.push_back((*it)[1].str());
    }
    return out;
  }

 private:
  std::string id_;
  PromptRole role_;
  std::string body_;
};

struct PromptBundle {
  std::string system;
  std::string user;
  std::string fingerprint;
  /// Case the bundle was rendered for; not part of the fingerprint.
  std::string case_id;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

inline std::string prompt_fingerprint(std::string_view system, std::string_view user) {
  return FieldHasher{}.field(system).field(user).hex();
}

inline nlohmann::ordered_json to_json(const PromptBundle& b) {
  return {{"case_id", b.case_id},
          {"fingerprint", b.fingerprint},
          {"system", b.system},
          {"user", b.user}};
}

inline PromptBundle bundle_from_json(const nlohmann::json& j) {
  PromptBundle b;
  b.case_id = j.value("case_id", "");
  b.fingerprint = j.at("fingerprint").get<std::string>();
  b.system = j.at("system").get<std::string>();
  b.user = j.at("user").get<std::string>();
  return b;
}

/// The canonical template pair. Immutable once loaded.
class TemplateSet {
 public:
  static constexpr std::string_view kSystemId = "system";
  static constexpr std::string_view kUserId = "user";

  TemplateSet(PromptTemplate system, PromptTemplate user)
      : templates_{std::move(system), std::move(user)} {
    if (templates_[0].role() != PromptRole::System ||
        templates_[1].role() != PromptRole::User) {
      throw Error(ErrorKind::TemplateError, "expected one system and one user template");
    }
    if (templates_[0].id() == templates_[1].id()) {
      throw Error(ErrorKind::TemplateError, "template ids must be unique");
    }
  }

  /// Reads system.txt and user.txt from `dir`.
  static TemplateSet load(const std::filesystem::path& dir) {
    auto read = [&](std::string_view id, PromptRole role) {
      const auto path = dir / (std::string(id) + ".txt");
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::TemplateError, "missing template file " + path.string());
      }
      return PromptTemplate(std::string(id), role, read_text_file(path));
    };
    return TemplateSet(read(kSystemId, PromptRole::System), read(kUserId, PromptRole::User));
  }

  /// Templates in protocol order: system first, then the user assembly.
  [[nodiscard]] const std::vector<PromptTemplate>& list() const noexcept { return templates_; }

  [[nodiscard]] PromptBundle render(const StudyCase& c) const {
    PromptBundle b;
    b.case_id = c.case_id;
    b.system = substitute(templates_[0], c);
    b.user = substitute(templates_[1], c);
    b.fingerprint = prompt_fingerprint(b.system, b.user);
    return b;
  }

 private:
  static std::string value_for(std::string_view name, const StudyCase& c) {
    auto required = [&](const std::string& v, std::string_view field) {
      if (v.empty()) {
        throw Error(ErrorKind::UnresolvedPlaceholder,
                    "case '" + c.case_id + "' has no " + std::string(field) +
                        " for {" + std::string(name) + "}");
      }
      return v;
    };
    if (name == "exposure") return required(c.exposure, "exposure");
    if (name == "outcome") return required(c.outcome, "outcome");
    if (name == "confounders") {
      if (c.measured_confounders.empty()) return "none reported";
      std::string out;
      for (const auto& m : c.measured_confounders) {
        if (!out.empty()) out += "; ";
        out += m;
      }
      return out;
    }
    if (name == "measure") return std::string(to_long_string(c.estimate.measure));
    if (name == "effect_value") {
      if (!(std::isfinite(c.estimate.value) && c.estimate.value > 0.0)) {
        throw Error(ErrorKind::UnresolvedPlaceholder,
                    "case '" + c.case_id + "' has no valid effect estimate");
      }
      return fmt::shortest(c.estimate.value);
    }
    throw Error(ErrorKind::UnresolvedPlaceholder, "unknown placeholder {" + std::string(name) + "}");
  }

  static std::string substitute(const PromptTemplate& t, const StudyCase& c) {
    const std::string& body = t.body();
    std::string out;
    out.reserve(body.size() + 256);
    std::size_t pos = 0;
    while (pos < body.size()) {
      const auto open = body.find('{', pos);
      if (open == std::string::npos) break;
      const auto close = body.find('}', open);
      if (close == std::string::npos) break;
      const std::string_view name(body.data() + open + 1, close - open - 1);
      if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end()) {
        out.append(body, pos, open + 1 - pos);
        pos = open + 1;
        continue;
      }
      out.append(body, pos, open - pos);
      out += value_for(name, c);
      pos = close + 1;
    }
    out.append(body, pos, std::string::npos);
    return out;
  }

  std::vector<PromptTemplate> templates_;
};

}  // namespace evsens
