#include "clincascade/relation.hpp"

#include <algorithm>

#include "clincascade/text.hpp"

namespace clincascade {

namespace {

constexpr std::string_view kTypes[] = {
    "neoplastic process", "autoimmune process", "precancer", "disease",
    "infection",          "benign tumor",       "symptom",   "abnormality",
    "syndrome",           "pathological function", "poisoning", "no disease",
};

constexpr std::string_view kSeverities[] = {"harmless", "mild", "important", "extreme"};

constexpr std::string_view kSites[] = {
    "skin", "extremities", "all", "hand", "joints", "head",
    "face", "leg",         "mouth", "torso", "genitals", "connective tissue",
};

struct Alias {
    std::string_view from;
    std::string_view to;
};

constexpr Alias kSeverityAliases[] = {
    {"light", "mild"},       {"deadly", "extreme"}, {"inoffensive", "harmless"},
    {"significant", "important"}, {"major", "important"}, {"minor", "mild"},
    {"moderate", "mild"},
};

}  // namespace

std::string_view to_string(Relation r) noexcept {
    switch (r) {
        case Relation::type: return "type";
        case Relation::severity: return "severity";
        case Relation::site: return "site";
    }
    return "?";
}

std::optional<Relation> parse_relation(std::string_view name) {
    const std::string key = text::normalize_label(name);
    for (const Relation r : kAllRelations) {
        if (key == to_string(r)) return r;
    }
    return std::nullopt;
}

std::span<const std::string_view> type_vocabulary() noexcept { return kTypes; }
std::span<const std::string_view> severity_vocabulary() noexcept { return kSeverities; }
std::span<const std::string_view> site_vocabulary() noexcept { return kSites; }

std::span<const std::string_view> vocabulary(Relation r) noexcept {
    switch (r) {
        case Relation::type: return kTypes;
        case Relation::severity: return kSeverities;
        case Relation::site: return kSites;
    }
    return {};
}

bool in_vocabulary(Relation r, std::string_view value) noexcept {
    const auto vocab = vocabulary(r);
    return std::find(vocab.begin(), vocab.end(), value) != vocab.end();
}

std::string canonicalize_severity(std::string_view value) {
    std::string key = text::normalize_label(value);
    for (const auto& alias : kSeverityAliases) {
        if (key == alias.from) return std::string(alias.to);
    }
    return key;
}

}  // namespace clincascade
