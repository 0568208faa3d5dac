#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clipagent {

// Lowercased ASCII words; any byte that is not an ASCII letter or digit separates
// words, except bytes >= 0x80 which are kept so UTF-8 text survives.
std::vector<std::string> rouge_tokens(std::string_view text);

// Lowercased, whitespace-separated words.
std::vector<std::string> wer_tokens(std::string_view text);

// Word-level Levenshtein distance (unit substitution / insertion / deletion).
std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref);

// edit_distance / |ref|; 0 when both are empty, 1 when only ref is empty.
double word_error_rate(std::string_view hypothesis, std::string_view reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// F-measures on token sequences. If neither side has any n-grams of order n,
// Rouge-N falls back to Rouge-1.
double rouge_n(std::span<const std::string> pred, std::span<const std::string> ref, int n);
double rouge_l(std::span<const std::string> pred, std::span<const std::string> ref);

// Mean of Rouge-1, Rouge-2 and Rouge-L F-measures; 1 when both texts have no tokens.
double rouge_score(std::string_view prediction, std::string_view reference);

}  // namespace clipagent
