// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/catalog.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

#include "semprobe/error.hpp"

namespace semprobe {

using ojson = nlohmann::ordered_json;

std::string_view to_string(OddDimension d) {
  switch (d) {
    case OddDimension::kActors: return "Actors";
    case OddDimension::kActivities: return "Activities";
    case OddDimension::kEnvironment: return "Environment";
    case OddDimension::kSensors: return "Sensors";
  }
  return "";
}

std::optional<OddDimension> parse_dimension(std::string_view name) {
  for (auto d : kAllDimensions) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

const Factor* FactorCatalog::find_factor(std::string_view factor_id) const {
  for (const auto& dim : dimensions) {
    for (const auto& f : dim.factors) {
      if (f.id == factor_id) return &f;
    }
  }
  return nullptr;
}

std::size_t FactorCatalog::factor_count() const {
  std::size_t n = 0;
  for (const auto& dim : dimensions) n += dim.factors.size();
  return n;
}

namespace {

bool is_slug(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

bool is_token_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  fail(ErrorCode::kValidation, path + ": " + what);
}

const ojson& member(const ojson& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) invalid(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) invalid(path, std::string("missing field '") + key + "'");
  return *it;
}

std::string string_member(const ojson& obj, const char* key, const std::string& path) {
  const auto& v = member(obj, key, path);
  if (!v.is_string()) invalid(path + "." + key, "expected a string");
  return v.get<std::string>();
}

const ojson& array_member(const ojson& obj, const char* key, const std::string& path) {
  const auto& v = member(obj, key, path);
  if (!v.is_array()) invalid(path + "." + key, "expected an array");
  return v;
}

std::string indexed(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

}  // namespace

std::vector<std::string> template_placeholders(std::string_view text) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '}') fail(ErrorCode::kValidation, "unmatched '}' in template");
    if (text[i] != '{') continue;
    const auto close = text.find('}', i + 1);
    if (close == std::string_view::npos) fail(ErrorCode::kValidation, "unclosed '{' in template");
    const auto token = text.substr(i + 1, close - i - 1);
    if (token.empty() || !std::all_of(token.begin(), token.end(), is_token_char)) {
      fail(ErrorCode::kValidation, "malformed placeholder '{" + std::string(token) + "}'");
    }
    tokens.emplace_back(token);
    i = close;
  }
  return tokens;
}

FactorCatalog parse_catalog(std::string_view document) {
  ojson root;
  try {
    root = ojson::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kValidation, std::string("$: not valid JSON: ") + e.what());
  }
  FactorCatalog catalog;
  catalog.odd_description = string_member(root, "odd", "$");
  const auto& dims = array_member(root, "dimensions", "$");

  std::set<OddDimension> seen_dims;
  std::set<std::string, std::less<>> seen_factors;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    const auto dpath = indexed("dimensions", di);
    const auto name = string_member(dims[di], "name", dpath);
    const auto dim_name = parse_dimension(name);
    if (!dim_name) invalid(dpath + ".name", "unknown dimension '" + name + "'");
    if (!seen_dims.insert(*dim_name).second) invalid(dpath, "duplicate dimension: " + name);

    Dimension dim{*dim_name, {}};
    const auto& factors = array_member(dims[di], "factors", dpath);
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const auto fpath = indexed(dpath + ".factors", fi);
      Factor factor;
      factor.id = string_member(factors[fi], "id", fpath);
      if (!is_slug(factor.id)) invalid(fpath + ".id", "factor id must match [a-z0-9_]+");
      if (!seen_factors.insert(factor.id).second) {
        invalid(fpath + ".id", "duplicate factor id '" + factor.id + "'");
      }
      factor.name = string_member(factors[fi], "name", fpath);
      const auto& levels = array_member(factors[fi], "levels", fpath);
      if (levels.empty()) invalid(fpath + ".levels", "factor has no levels");
      std::set<std::string, std::less<>> seen_levels;
      for (std::size_t li = 0; li < levels.size(); ++li) {
        const auto lpath = indexed(fpath + ".levels", li);
        Level level;
        level.id = string_member(levels[li], "id", lpath);
        if (!is_slug(level.id)) invalid(lpath + ".id", "level id must match [a-z0-9_]+");
        if (!seen_levels.insert(level.id).second) {
          invalid(lpath + ".id", "duplicate level id '" + level.id + "'");
        }
        level.label = string_member(levels[li], "label", lpath);
        level.template_text = string_member(levels[li], "template", lpath);
        if (level.template_text.empty()) invalid(lpath + ".template", "template is empty");
        try {
          template_placeholders(level.template_text);
        } catch (const Error& e) {
          invalid(lpath + ".template", e.what());
        }
        factor.levels.push_back(std::move(level));
      }
      dim.factors.push_back(std::move(factor));
    }
    catalog.dimensions.push_back(std::move(dim));
  }
  for (auto d : kAllDimensions) {
    if (!seen_dims.contains(d)) {
      fail(ErrorCode::kValidation, "$.dimensions: missing dimension: " + std::string(to_string(d)));
    }
  }
  return catalog;
}

std::string serialize_catalog(const FactorCatalog& catalog) {
  ojson root;
  root["odd"] = catalog.odd_description;
  root["dimensions"] = ojson::array();
  for (const auto& dim : catalog.dimensions) {
    ojson d;
    d["name"] = to_string(dim.name);
    d["factors"] = ojson::array();
    for (const auto& f : dim.factors) {
      ojson jf;
      jf["id"] = f.id;
      jf["name"] = f.name;
      jf["levels"] = ojson::array();
      for (const auto& l : f.levels) {
        jf["levels"].push_back({{"id", l.id}, {"label", l.label}, {"template", l.template_text}});
      }
      d["factors"].push_back(std::move(jf));
    }
    root["dimensions"].push_back(std::move(d));
  }
  return root.dump(2) + "\n";
}

PromptSpec render_prompt(const FactorCatalog& catalog, std::string_view factor_id,
                         std::string_view level_id, const PromptContext& context) {
  const auto* factor = catalog.find_factor(factor_id);
  if (!factor) fail(ErrorCode::kNotFound, "unknown factor '" + std::string(factor_id) + "'");
  const auto level = std::find_if(factor->levels.begin(), factor->levels.end(),
                                  [&](const Level& l) { return l.id == level_id; });
  if (level == factor->levels.end()) {
    fail(ErrorCode::kNotFound, "unknown level '" + std::string(level_id) + "' for factor '" +
                                   std::string(factor_id) + "'");
  }
  const std::string_view tpl = level->template_text;
  std::string out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] != '{') {
      out.push_back(tpl[i]);
      continue;
    }
    const auto close = tpl.find('}', i + 1);
    const auto token = tpl.substr(i + 1, close - i - 1);
    const auto it = context.find(token);
    if (it == context.end()) {
      fail(ErrorCode::kUnresolvedPlaceholder, "unresolved placeholder {" + std::string(token) + "}");
    }
    out += it->second;
    i = close;
  }
  return PromptSpec{std::move(out), std::nullopt,
                    CatalogEntryRef{std::string(factor_id), std::string(level_id)}};
}

PromptSpec custom_prompt(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    fail(ErrorCode::kInvalidArgument, "custom prompt is empty");
  }
  return PromptSpec{std::string(text), std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------

MockLlmClient::MockLlmClient() : fixture_(builtin_saw_catalog()) {}
MockLlmClient::MockLlmClient(std::string fixture_document) : fixture_(std::move(fixture_document)) {}

DraftCatalog draft_catalog_via_llm(LlmClient& client, std::string_view odd_text) {
  auto document = client.draft_catalog(odd_text);
  return DraftCatalog{parse_catalog(document), true, client.id()};
}

std::string_view builtin_saw_catalog() {
  static constexpr std::string_view kCatalog = R"json({
  "odd": "Overhead RGB camera above the table of a dimension saw; operators feed panels by hand in a joinery workshop.",
  "dimensions": [
    {
      "name": "Actors",
      "factors": [
        {
          "id": "hand_covering",
          "name": "Hand covering",
          "levels": [
            {"id": "cut_resistant", "label": "Cut-resistant glove", "template": "a hand wearing a grey cut-resistant work glove on a saw table"},
            {"id": "leather", "label": "Leather glove", "template": "a hand wearing a brown leather work glove on a saw table"},
            {"id": "glove", "label": "Glove (parameterised)", "template": "a hand wearing a {glove_type} glove on a saw table"}
          ]
        }
      ]
    },
    {
      "name": "Activities",
      "factors": [
        {
          "id": "hand_modification",
          "name": "Hand modification",
          "levels": [
            {"id": "motion_blur", "label": "Motion blur", "template": "a fast moving hand with strong motion blur pushing a panel"},
            {"id": "partial_occlusion", "label": "Partially occluded", "template": "a hand partially hidden behind a wooden panel"}
          ]
        }
      ]
    },
    {
      "name": "Environment",
      "factors": [
        {
          "id": "surface_contamination",
          "name": "Surface contamination",
          "levels": [
            {"id": "heavy_sawdust", "label": "Heavy sawdust", "template": "heavy sawdust covering the table surface"},
            {"id": "wood_chips", "label": "Wood chips", "template": "scattered wood chips on the saw table"}
          ]
        }
      ]
    },
    {
      "name": "Sensors",
      "factors": [
        {
          "id": "illumination",
          "name": "Illumination",
          "levels": [
            {"id": "low_light", "label": "Low light", "template": "the same scene under dim low light"},
            {"id": "specular_glare", "label": "Specular glare", "template": "strong specular glare from an overhead lamp"}
          ]
        }
      ]
    }
  ]
}
)json";
  return kCatalog;
}

}  // namespace semprobe
