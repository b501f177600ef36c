#include "clincascade/augment.hpp"

#include "clincascade/text.hpp"

namespace clincascade::augment {

std::string append(std::string_view text, const std::vector<Segment>& segments) {
    if (segments.empty()) return std::string(text);
    std::string out;
    out.reserve(text.size() + 32 * segments.size());
    for (std::size_t pos = 0; pos < text.size();) {
        const auto hit = text.find(kSeparator, pos);
        if (hit == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, hit - pos));
        out.push_back(' ');
        pos = hit + kSeparator.size();
    }
    for (const auto& [name, value] : segments) {
        out += ' ';
        out += kSeparator;
        out += ' ';
        out += name;
        out += '=';
        out += value;
    }
    return out;
}

Parsed parse(std::string_view input) {
    Parsed parsed;
    const auto first = input.find(kSeparator);
    if (first == std::string_view::npos) {
        parsed.base = std::string(input);
        return parsed;
    }
    std::string_view base = input.substr(0, first);
    if (!base.empty() && base.back() == ' ') base.remove_suffix(1);
    parsed.base = std::string(base);

    std::size_t pos = first + kSeparator.size();
    while (pos <= input.size()) {
        const auto next = input.find(kSeparator, pos);
        std::string_view seg = input.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        if (!seg.empty() && seg.front() == ' ') seg.remove_prefix(1);
        if (next != std::string_view::npos && !seg.empty() && seg.back() == ' ') seg.remove_suffix(1);
        const auto eq = seg.find('=');
        if (eq != std::string_view::npos) {
            parsed.segments.emplace_back(std::string(seg.substr(0, eq)), std::string(seg.substr(eq + 1)));
        }
        if (next == std::string_view::npos) break;
        pos = next + kSeparator.size();
    }
    return parsed;
}

}  // namespace clincascade::augment
