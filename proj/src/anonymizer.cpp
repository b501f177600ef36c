#include "clincascade/anonymizer.hpp"

#include <algorithm>

#include <json.hpp>
#include <toml.hpp>

#include "clincascade/error.hpp"
#include "clincascade/io.hpp"
#include "clincascade/text.hpp"

namespace clincascade::anonymizer {

namespace {

constexpr const char* kModule = "anonymizer";

enum class TokenKind { word, masked };

struct Token {
    std::size_t begin;
    std::size_t end;
    std::string key;  // folded, accent-free
    TokenKind kind;
};

/// Word tokens of `text`, with existing mask-token occurrences collapsed into
/// single `masked` tokens.
std::vector<Token> scan(std::string_view text, std::string_view mask_token) {
    std::vector<std::pair<std::size_t, std::size_t>> protected_ranges;
    for (auto pos = text.find(mask_token); pos != std::string_view::npos; pos = text.find(mask_token, pos)) {
        protected_ranges.emplace_back(pos, pos + mask_token.size());
        pos += mask_token.size();
    }
    std::vector<Token> tokens;
    std::size_t next_protected = 0;
    for (const auto& span : text::word_spans(text)) {
        while (next_protected < protected_ranges.size() && protected_ranges[next_protected].second <= span.begin) {
            ++next_protected;
        }
        if (next_protected < protected_ranges.size() && protected_ranges[next_protected].first < span.end) {
            const auto [pb, pe] = protected_ranges[next_protected];
            if (tokens.empty() || tokens.back().kind != TokenKind::masked || tokens.back().begin != pb) {
                tokens.push_back({pb, pe, {}, TokenKind::masked});
            }
            continue;
        }
        tokens.push_back({span.begin, span.end, text::fold_key(text.substr(span.begin, span.end - span.begin)),
                          TokenKind::word});
    }
    return tokens;
}

bool is_boundary_char(char c) { return c == '.' || c == '!' || c == '?' || c == ';' || c == '\n'; }

/// True when the gap between two tokens closes a sentence. `after_trigger`
/// lets one abbreviation period through ("dra. López").
bool sentence_break(std::string_view gap, bool after_trigger) {
    bool skipped_abbrev = !after_trigger;
    for (const char c : gap) {
        if (!is_boundary_char(c)) continue;
        if (c == '.' && !skipped_abbrev) {
            skipped_abbrev = true;
            continue;
        }
        return true;
    }
    return false;
}

bool whitespace_only(std::string_view gap) {
    for (std::size_t i = 0; i < gap.size();) {
        const auto d = text::decode_at(gap, i);
        if (!text::is_space(d.code_point)) return false;
        i += d.length;
    }
    return true;
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

std::size_t Gazetteer::max_tokens() const {
    std::size_t best = 0;
    for (const auto& e : entries) best = std::max(best, text::word_spans(e).size());
    return best;
}

Gazetteer parse_gazetteer(std::string name, std::string_view content, std::string source) {
    Gazetteer g{std::move(name), {}, std::move(source)};
    for (auto line : text::split(content, '\n')) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string entry = text::trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        // Re-join word tokens so multiword entries compare equal to scanned text.
        std::string key;
        const std::string folded = text::fold_key(entry);
        for (const auto& s : text::word_spans(folded)) {
            if (!key.empty()) key.push_back(' ');
            key.append(folded, s.begin, s.end - s.begin);
        }
        if (!key.empty()) g.entries.insert(std::move(key));
    }
    return g;
}

Gazetteer load_gazetteer(const std::filesystem::path& path, std::string name, std::string source) {
    return parse_gazetteer(std::move(name), io::read_file(path, kModule, "load_gazetteer"), std::move(source));
}

bool MaskingRuleSet::is_suppressed(std::string_view folded) const {
    return frequent_words.contains(folded) || exceptions.contains(folded);
}

bool MaskingRuleSet::is_title(std::string_view folded) const {
    return std::any_of(title_patterns.begin(), title_patterns.end(),
                       [&](const std::string& t) { return text::fold_key(t) == folded; });
}

const Gazetteer* MaskingRuleSet::match(std::string_view folded) const {
    for (const auto& g : name_gazetteers) {
        if (g.contains(folded)) return &g;
    }
    return nullptr;
}

void MaskingRuleSet::validate() const {
    if (mask_token.empty()) throw Error(ErrorKind::validation, kModule, "rules", "mask_token must be nonempty");
    for (const auto c : mask_token) {
        if (c >= '0' && c <= '9') {
            throw Error(ErrorKind::validation, kModule, "rules", "mask_token must not contain digits");
        }
    }
    for (const auto& g : name_gazetteers) {
        if (g.entries.empty()) {
            throw Error(ErrorKind::validation, kModule, "rules", "gazetteer '" + g.name + "' has no entries");
        }
    }
}

MaskingRuleSet load_rules(const std::filesystem::path& path) {
    const std::string op = "load_rules";
    toml::table doc;
    try {
        doc = toml::parse(io::read_file(path, kModule, op), path.string());
    } catch (const toml::parse_error& e) {
        throw Error(ErrorKind::schema, kModule, op, std::string("invalid TOML: ") + std::string(e.description()));
    }
    const auto base = path.parent_path();
    MaskingRuleSet rules;
    if (auto t = doc["mask_token"].value<std::string>()) rules.mask_token = *t;
    if (auto* arr = doc["title_patterns"].as_array()) {
        rules.title_patterns.clear();
        for (const auto& v : *arr) {
            if (auto s = v.value<std::string>()) rules.title_patterns.push_back(*s);
        }
    }
    if (auto* arr = doc["exceptions"].as_array()) {
        for (const auto& v : *arr) {
            if (auto s = v.value<std::string>()) rules.exceptions.insert(text::fold_key(text::trim(*s)));
        }
    }
    if (auto file = doc["exceptions_file"].value<std::string>()) {
        for (const auto& e : load_gazetteer(resolve(base, *file), "exceptions").entries) rules.exceptions.insert(e);
    }
    if (auto* fw = doc["frequent_words"].as_table()) {
        const auto p = (*fw)["path"].value<std::string>();
        if (!p) throw Error(ErrorKind::schema, kModule, op, "[frequent_words] needs a path");
        rules.frequent_words =
            load_gazetteer(resolve(base, *p), "frequent_words", (*fw)["source"].value_or(std::string{}));
    }
    if (auto* gs = doc["gazetteers"].as_array()) {
        for (const auto& node : *gs) {
            const auto* g = node.as_table();
            const auto name = g ? (*g)["name"].value<std::string>() : std::nullopt;
            const auto p = g ? (*g)["path"].value<std::string>() : std::nullopt;
            if (!name || !p) throw Error(ErrorKind::schema, kModule, op, "each [[gazetteers]] entry needs name and path");
            rules.name_gazetteers.push_back(
                load_gazetteer(resolve(base, *p), *name, (*g)["source"].value_or(std::string{})));
        }
    }
    rules.validate();
    return rules;
}

std::string strip_numeric(std::string_view input) {
    std::string out;
    out.reserve(input.size());
    for (std::size_t i = 0; i < input.size();) {
        const auto d = text::decode_at(input, i);
        if (!text::is_decimal_digit(d.code_point)) out.append(input.substr(i, d.length));
        i += d.length;
    }
    return out;
}

MaskResult mask_entities(std::string_view input, const MaskingRuleSet& rules) {
    const auto tokens = scan(input, rules.mask_token);
    std::size_t max_len = 1;
    for (const auto& g : rules.name_gazetteers) max_len = std::max(max_len, g.max_tokens());

    const auto gap = [&](std::size_t a, std::size_t b) {
        return input.substr(tokens[a].end, tokens[b].begin - tokens[a].end);
    };

    std::vector<MaskedSpan> spans;
    std::vector<bool> consumed(tokens.size(), false);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (consumed[i] || tokens[i].kind == TokenKind::masked) continue;
        const Token& tok = tokens[i];

        if (rules.is_title(tok.key)) {
            std::size_t taken = 0;
            for (std::size_t j = i + 1; j < tokens.size() && taken < 3; ++j) {
                if (sentence_break(gap(j - 1, j), j == i + 1)) break;
                const Token& next = tokens[j];
                if (next.kind == TokenKind::word) {
                    if (rules.is_exception(next.key)) break;
                    if (rules.frequent_words.contains(next.key) && !rules.match(next.key)) break;
                    if (rules.is_title(next.key)) break;
                    spans.push_back({{}, next.begin, next.end, std::string(kTitleRule)});
                }
                consumed[j] = true;
                ++taken;
            }
            continue;
        }

        // Longest multiword gazetteer match starting here.
        for (std::size_t len = std::min(max_len, tokens.size() - i); len >= 1; --len) {
            std::string key = tok.key;
            bool usable = tok.kind == TokenKind::word && !rules.is_exception(tok.key);
            for (std::size_t k = i + 1; usable && k < i + len; ++k) {
                usable = tokens[k].kind == TokenKind::word && !consumed[k] && whitespace_only(gap(k - 1, k)) &&
                         !rules.is_exception(tokens[k].key);
                key += ' ' + tokens[k].key;
            }
            if (!usable || rules.is_suppressed(key)) continue;
            if (const Gazetteer* g = rules.match(key)) {
                spans.push_back({{}, tok.begin, tokens[i + len - 1].end, g->name});
                for (std::size_t k = i; k < i + len; ++k) consumed[k] = true;
                break;
            }
        }
    }

    std::sort(spans.begin(), spans.end(), [](const MaskedSpan& a, const MaskedSpan& b) { return a.start < b.start; });
    MaskResult result;
    std::size_t cursor = 0;
    for (const auto& s : spans) {
        result.text.append(input.substr(cursor, s.start - cursor));
        result.text += rules.mask_token;
        cursor = s.end;
    }
    result.text.append(input.substr(cursor));
    result.spans = std::move(spans);
    return result;
}

std::string MaskingReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["n_numeric_removed"] = n_numeric_removed;
    doc["n_masked_by_rule"] = nlohmann::ordered_json::object();
    for (const auto& [rule, n] : n_masked_by_rule) doc["n_masked_by_rule"][rule] = n;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : masked_spans) {
        arr.push_back({{"report_id", s.report_id}, {"start", s.start}, {"end", s.end}, {"rule", s.rule}});
    }
    doc["masked_spans"] = std::move(arr);
    return doc.dump(2) + "\n";
}

std::pair<corpus::Corpus, MaskingReport> anonymize(const corpus::Corpus& corpus, const MaskingRuleSet& rules) {
    rules.validate();
    MaskingReport report;
    std::vector<corpus::Report> out;
    out.reserve(corpus.size());
    for (const auto& r : corpus) {
        // origin[k] is the byte in r.text that became byte k of the stripped text.
        std::string stripped;
        std::vector<std::size_t> origin;
        for (std::size_t i = 0; i < r.text.size();) {
            const auto d = text::decode_at(r.text, i);
            if (text::is_decimal_digit(d.code_point)) {
                ++report.n_numeric_removed;
            } else {
                stripped.append(r.text, i, d.length);
                for (std::size_t b = 0; b < d.length; ++b) origin.push_back(i + b);
            }
            i += d.length;
        }
        auto masked = mask_entities(stripped, rules);
        for (auto& s : masked.spans) {
            s.report_id = r.id;
            s.start = origin[s.start];
            s.end = origin[s.end - 1] + 1;
            ++report.n_masked_by_rule[s.rule];
            report.masked_spans.push_back(std::move(s));
        }
        auto anon = r;
        anon.text = std::move(masked.text);
        // A report made only of digits would otherwise become empty.
        if (text::trim(anon.text).empty()) anon.text = rules.mask_token;
        out.push_back(std::move(anon));
    }
    return {corpus::Corpus(std::move(out)), std::move(report)};
}

Agreement agreement(const std::map<std::string, Verdict>& a, const std::map<std::string, Verdict>& b) {
    Agreement out;
    for (const auto& [id, verdict] : a) {
        const auto it = b.find(id);
        if (it == b.end()) continue;
        ++out.n_common;
        if (it->second != verdict) ++out.n_disagree;
    }
    if (out.n_common == 0) {
        throw Error(ErrorKind::validation, kModule, "agreement", "the two reviewers share no judged ids");
    }
    out.rate = 1.0 - static_cast<double>(out.n_disagree) / static_cast<double>(out.n_common);
    return out;
}

}  // namespace clincascade::anonymizer
