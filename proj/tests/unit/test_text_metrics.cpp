#include <doctest.h>

#include <random>

#include "clipagent/text_metrics.hpp"
#include "support/oracles.hpp"

using namespace clipagent;

namespace {

std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> vocab{"the", "cat", "sat", "on", "mat", "a", "dog", "ran"};
    std::vector<std::string> out(rng() % (max_len + 1));
    for (auto& w : out) w = vocab[rng() % vocab.size()];
    return out;
}

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
}

}  // namespace

TEST_CASE("tokenizers") {
    CHECK(rouge_tokens("Hello, World! it's 2x") == std::vector<std::string>{"hello", "world", "it", "s", "2x"});
    CHECK(wer_tokens("  Hello,  World  ") == std::vector<std::string>{"hello,", "world"});
    CHECK(rouge_tokens("").empty());
}

TEST_CASE("word error rate") {
    CHECK(word_error_rate("a b c d", "a b c d") == 0.0);
    CHECK(word_error_rate("a x c d", "a b c d") == 0.25);
    CHECK(word_error_rate("", "a b") == 1.0);
    CHECK(word_error_rate("a b", "") == 1.0);
    CHECK(word_error_rate("", "") == 0.0);
    CHECK(word_error_rate("a b c d e f", "a") == 5.0);
}

TEST_CASE("rouge worked examples") {
    CHECK(rouge_score("the cat sat", "the cat sat") == 1.0);
    CHECK(rouge_score("", "") == 1.0);
    CHECK(rouge_score("dog", "the cat") == 0.0);
    // one shared unigram out of 2 and 2: R1 = 0.5, R2 = 0, RL = 0.5
    CHECK(rouge_score("the dog", "the cat") == doctest::Approx(1.0 / 3.0));
    // single tokens: no bigrams on either side, so R2 falls back to R1
    CHECK(rouge_score("Cat", "cat") == 1.0);
}

TEST_CASE("edit distance, LCS and rouge-n agree with brute-force oracles") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 400; ++i) {
        const auto a = random_words(rng, 10);
        const auto b = random_words(rng, 10);
        CHECK(edit_distance(a, b) == oracle::edit_distance(a, b));
        CHECK(lcs_length(a, b) == oracle::lcs_exhaustive(a, b));
        for (int n : {1, 2}) {
            const bool both_empty = a.size() < static_cast<std::size_t>(n) && b.size() < static_cast<std::size_t>(n);
            if (!both_empty) CHECK(rouge_n(a, b, n) == oracle::rouge_n_bruteforce(a, b, n));
        }
        CHECK(rouge_l(a, b) == oracle::f1(oracle::lcs_exhaustive(a, b), a.size(), b.size()));
        if (!b.empty())
            CHECK(word_error_rate(join(a), join(b)) ==
                  static_cast<double>(oracle::edit_distance(a, b)) / static_cast<double>(b.size()));
    }
}
