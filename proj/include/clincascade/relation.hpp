#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace clincascade {

/// Ontology-derived attribute of a disease.
enum class Relation { type, severity, site };

inline constexpr std::array<Relation, 3> kAllRelations = {Relation::type, Relation::severity, Relation::site};

std::string_view to_string(Relation r) noexcept;
std::optional<Relation> parse_relation(std::string_view name);

/// Closed vocabularies for each relation, in canonical order.
std::span<const std::string_view> type_vocabulary() noexcept;
std::span<const std::string_view> severity_vocabulary() noexcept;
std::span<const std::string_view> site_vocabulary() noexcept;
std::span<const std::string_view> vocabulary(Relation r) noexcept;

bool in_vocabulary(Relation r, std::string_view value) noexcept;

/// Maps the alternative severity spellings found in source material
/// (light, deadly, inoffensive, significant, major, minor, moderate) onto the
/// four canonical grades; any other value is returned normalized but
/// otherwise unchanged. Idempotent.
std::string canonicalize_severity(std::string_view value);

}  // namespace clincascade
