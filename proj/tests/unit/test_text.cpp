#include <doctest.h>

#include <random>
#include <string>

#include "clincascade/classifier.hpp"
#include "clincascade/text.hpp"

using namespace clincascade;

TEST_CASE("tokenize lowercases and splits on punctuation and spaces") {
    CHECK(classifier::tokenize("Lesión EN brazo") == std::vector<std::string>{"lesión", "en", "brazo"});
    CHECK(classifier::tokenize("placa,  eritematosa.\tPrurito") ==
          std::vector<std::string>{"placa", "eritematosa", "prurito"});
    CHECK(classifier::tokenize("").empty());
    CHECK(classifier::tokenize(" ... ").empty());
}

TEST_CASE("tokens never contain whitespace") {
    std::mt19937_64 g(5);
    const std::string alphabet[] = {"a", "B", "é", "Ñ", " ", "\t", "\n", ".", ",", "7", "ü", "-"};
    for (int round = 0; round < 300; ++round) {
        std::string s;
        const int len = static_cast<int>(g() % 40);
        for (int i = 0; i < len; ++i) s += alphabet[g() % std::size(alphabet)];
        for (const auto& t : classifier::tokenize(s)) {
            CHECK_FALSE(t.empty());
            for (const char c : t) CHECK((c != ' ' && c != '\t' && c != '\n'));
        }
    }
}

TEST_CASE("fold_key removes case and accents") {
    CHECK(text::fold_key("García") == "garcia");
    CHECK(text::fold_key("MUÑOZ") == "munoz");
    CHECK(text::fold_key("Ángel") == "angel");
}

TEST_CASE("normalize_label collapses whitespace") {
    CHECK(text::normalize_label("  Neoplastic   Process ") == "neoplastic process");
}

TEST_CASE("malformed utf-8 decodes to the replacement character") {
    const std::string bad = "\xff";
    const auto d = text::decode_at(bad, 0);
    CHECK(d.code_point == text::kReplacementChar);
    CHECK(d.length == 1);
}

TEST_CASE("decimal digits of other scripts are recognised") {
    CHECK(text::is_decimal_digit(U'7'));
    CHECK(text::is_decimal_digit(U'٣'));  // Arabic-Indic three
    CHECK(text::is_decimal_digit(U'５'));  // fullwidth five
    CHECK_FALSE(text::is_decimal_digit(U'a'));
}

TEST_CASE("fnv1a64 known vectors") {
    CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(text::hex64(0xabcULL) == "0000000000000abc");
}
