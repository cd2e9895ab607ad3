// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semprobe {

/// The four ODD dimensions. Every catalog carries each exactly once.
enum class OddDimension { kActors, kActivities, kEnvironment, kSensors };

inline constexpr std::array<OddDimension, 4> kAllDimensions = {
    OddDimension::kActors, OddDimension::kActivities, OddDimension::kEnvironment,
    OddDimension::kSensors};

std::string_view to_string(OddDimension d);
std::optional<OddDimension> parse_dimension(std::string_view name);

struct Level {
  std::string id;
  std::string label;
  std::string template_text;
  bool operator==(const Level&) const = default;
};

struct Factor {
  std::string id;
  std::string name;
  std::vector<Level> levels;
  bool operator==(const Factor&) const = default;
};

struct Dimension {
  OddDimension name = OddDimension::kActors;
  std::vector<Factor> factors;
  bool operator==(const Dimension&) const = default;
};

struct FactorCatalog {
  std::string odd_description;
  std::vector<Dimension> dimensions;  // document order, exactly four

  const Factor* find_factor(std::string_view factor_id) const;
  std::size_t factor_count() const;
  bool operator==(const FactorCatalog&) const = default;
};

struct CatalogEntryRef {
  std::string factor_id;
  std::string level_id;
  bool operator==(const CatalogEntryRef&) const = default;
};

/// A rendered prompt plus where it came from. An empty `source` means CUSTOM.
struct PromptSpec {
  std::string text;
  std::optional<std::string> negative_text;
  std::optional<CatalogEntryRef> source;

  bool is_custom() const noexcept { return !source.has_value(); }
  bool operator==(const PromptSpec&) const = default;
};

// Throws Error(kValidation) with the offending JSON path in the message.
FactorCatalog parse_catalog(std::string_view document);
std::string serialize_catalog(const FactorCatalog& catalog);

/// Placeholder tokens of a template, in order of appearance (duplicates kept).
/// Throws kValidation on a malformed brace sequence.
std::vector<std::string> template_placeholders(std::string_view template_text);

using PromptContext = std::map<std::string, std::string, std::less<>>;

// Errors: kNotFound (factor/level), kUnresolvedPlaceholder (names the token).
PromptSpec render_prompt(const FactorCatalog& catalog, std::string_view factor_id,
                         std::string_view level_id, const PromptContext& context = {});

// Errors: kInvalidArgument when the text is blank.
PromptSpec custom_prompt(std::string_view text);

// ---------------------------------------------------------------------------
// LLM-assisted drafting

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string id() const = 0;
  /// Returns the raw catalog JSON document produced for an ODD description.
  virtual std::string draft_catalog(std::string_view odd_text) = 0;
};

/// POST /draft_catalog {odd_text} -> catalog document.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(std::string base_url,
                         std::chrono::milliseconds timeout = std::chrono::seconds(120));
  std::string id() const override { return "llm:" + base_url_; }
  std::string draft_catalog(std::string_view odd_text) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// Echoes a fixed document regardless of input.
class MockLlmClient final : public LlmClient {
 public:
  MockLlmClient();  // uses the built-in dimension-saw fixture
  explicit MockLlmClient(std::string fixture_document);
  std::string id() const override { return "llm:mock"; }
  std::string draft_catalog(std::string_view) override { return fixture_; }

 private:
  std::string fixture_;
};

/// An LLM-produced catalog. It passed the same validator as a hand-written one
/// but stays flagged until a person has reviewed it.
struct DraftCatalog {
  FactorCatalog catalog;
  bool requires_review = true;
  std::string generator;
};

DraftCatalog draft_catalog_via_llm(LlmClient& client, std::string_view odd_text);

/// Hand-detection-on-dimension-saws catalog used by the mock LLM and the demos.
std::string_view builtin_saw_catalog();

}  // namespace semprobe
