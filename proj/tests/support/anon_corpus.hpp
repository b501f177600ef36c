#pragma once

// Synthetic clinical notes seeded with gazetteer names, digits, exception
// terms and title patterns, plus the checks run over anonymized output.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "clincascade/anonymizer.hpp"
#include "clincascade/corpus.hpp"
#include "clincascade/text.hpp"

namespace support {

namespace detail {

inline std::string capitalize_words(const std::string& s, std::mt19937_64& g) {
    const int style = static_cast<int>(g() % 3);  // as is, Title Case, UPPER
    if (style == 0) return s;
    std::string out;
    bool start = true;
    for (const char c : s) {
        const bool letter = (c >= 'a' && c <= 'z');
        if (letter && (style == 2 || start)) {
            out.push_back(static_cast<char>(c - 'a' + 'A'));
        } else {
            out.push_back(c);
        }
        start = c == ' ';
    }
    return out;
}

template <typename Set>
std::string pick(const Set& s, std::mt19937_64& g) {
    auto it = s.begin();
    std::advance(it, static_cast<long>(g() % s.size()));
    return *it;
}

}  // namespace detail

inline clincascade::corpus::Corpus anonymizer_corpus(const clincascade::anonymizer::MaskingRuleSet& rules, std::size_t n,
                                        std::uint64_t seed) {
    static const std::vector<std::string> filler = {
        "paciente", "lesión", "consulta", "acude", "refiere", "presenta", "placa", "eritematosa", "prurito",
        "tratamiento", "crema", "revisión", "control", "meses", "semanas", "brazo", "espalda", "cara", "tronco",
        "biopsia", "evolución", "antecedentes", "alergias", "niega", "desde", "hace", "con", "sin", "en", "la", "de"};
    static const std::vector<std::string> titles = {"Dr.", "Dra.", "dr", "DRA.", "doctor", "Doctora"};
    static const std::vector<std::string> numbers = {"45 años", "tel. 612345678", "12/03/2019", "3mm", "2 cm",
                                                     "nº 7781", "٣ meses", "C.P. 28001"};
    std::vector<std::string> exceptions(rules.exceptions.begin(), rules.exceptions.end());
    std::mt19937_64 g(seed);
    std::vector<clincascade::corpus::Report> reports;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const std::size_t pieces = 8 + g() % 12;
        for (std::size_t p = 0; p < pieces; ++p) {
            if (!text.empty()) text += (g() % 6 == 0) ? ". " : (g() % 8 == 0 ? ", " : " ");
            switch (g() % 6) {
                case 0: {
                    const auto& gz = rules.name_gazetteers[g() % rules.name_gazetteers.size()];
                    text += detail::capitalize_words(detail::pick(gz.entries, g), g);
                    break;
                }
                case 1: {
                    text += titles[g() % titles.size()] + " ";
                    const auto& gz = rules.name_gazetteers[g() % 2];
                    text += detail::capitalize_words(detail::pick(gz.entries, g), g);
                    if (g() % 2) text += " " + detail::capitalize_words(detail::pick(rules.name_gazetteers[1].entries, g), g);
                    break;
                }
                case 2:
                    text += numbers[g() % numbers.size()];
                    break;
                case 3:
                    text += detail::capitalize_words(exceptions[g() % exceptions.size()], g);
                    break;
                default:
                    text += filler[g() % filler.size()];
            }
        }
        text += ".";
        reports.push_back({"anon-" + std::to_string(i), text, "eczema", {}});
    }
    return clincascade::corpus::Corpus(std::move(reports));
}

struct FoldedToken {
    std::string key;
    std::size_t begin, end;
};

inline std::vector<FoldedToken> folded_tokens(std::string_view s) {
    std::vector<FoldedToken> out;
    for (const auto& w : clincascade::text::word_spans(s)) {
        out.push_back({clincascade::text::fold_key(s.substr(w.begin, w.end - w.begin)), w.begin, w.end});
    }
    return out;
}

inline bool only_spaces(std::string_view s) {
    for (const char c : s) {
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r') return false;
    }
    return !s.empty();
}

/// Windows of whitespace-separated tokens that form a gazetteer entry and
/// should have been masked: single tokens that are not suppressed, or
/// multiword entries none of whose tokens is an exception.
inline std::size_t unmasked_gazetteer_hits(std::string_view s, const clincascade::anonymizer::MaskingRuleSet& rules) {
    const auto toks = folded_tokens(s);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        std::string key;
        bool has_exception = false;
        for (std::size_t j = i; j < toks.size() && j < i + 6; ++j) {
            if (j > i && !only_spaces(s.substr(toks[j - 1].end, toks[j].begin - toks[j - 1].end))) break;
            if (j > i) key += " ";
            key += toks[j].key;
            has_exception = has_exception || rules.exceptions.contains(toks[j].key);
            bool in_gazetteer = false;
            for (const auto& gz : rules.name_gazetteers) in_gazetteer = in_gazetteer || gz.entries.contains(key);
            if (!in_gazetteer) continue;
            const bool suppressed = j == i ? (rules.frequent_words.entries.contains(key) || rules.exceptions.contains(key))
                                           : has_exception;
            if (!suppressed) ++hits;
        }
    }
    return hits;
}

inline std::size_t exception_count(std::string_view s, const clincascade::anonymizer::MaskingRuleSet& rules) {
    std::size_t n = 0;
    for (const auto& t : folded_tokens(s)) n += rules.exceptions.contains(t.key);
    return n;
}

}  // namespace support
