#include "clipagent/text_metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace clipagent {

namespace {

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> ngram_counts(std::span<const std::string> toks, int n) {
    std::map<Gram, std::size_t> counts;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= toks.size(); ++i) ++counts[Gram(toks.begin() + i, toks.begin() + i + un)];
    return counts;
}

double f_measure(double overlap, double pred_total, double ref_total) {
    if (overlap <= 0.0 || pred_total <= 0.0 || ref_total <= 0.0) return 0.0;
    const double p = overlap / pred_total;
    const double r = overlap / ref_total;
    return 2.0 * p * r / (p + r);
}

}  // namespace

std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (is_word_byte(static_cast<unsigned char>(c))) {
            cur += ascii_lower(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> wer_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (!is_space(static_cast<unsigned char>(c))) {
            cur += ascii_lower(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref) {
    std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[ref.size()];
}

double word_error_rate(std::string_view hypothesis, std::string_view reference) {
    const auto hyp = wer_tokens(hypothesis);
    const auto ref = wer_tokens(reference);
    if (ref.empty()) return hyp.empty() ? 0.0 : 1.0;
    return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_n(std::span<const std::string> pred, std::span<const std::string> ref, int n) {
    const auto pc = ngram_counts(pred, n);
    const auto rc = ngram_counts(ref, n);
    if (pc.empty() && rc.empty() && n > 1) return rouge_n(pred, ref, 1);

    std::size_t overlap = 0, pred_total = 0, ref_total = 0;
    for (const auto& [g, c] : pc) pred_total += c;
    for (const auto& [g, c] : rc) {
        ref_total += c;
        if (auto it = pc.find(g); it != pc.end()) overlap += std::min(c, it->second);
    }
    return f_measure(static_cast<double>(overlap), static_cast<double>(pred_total),
                     static_cast<double>(ref_total));
}

double rouge_l(std::span<const std::string> pred, std::span<const std::string> ref) {
    return f_measure(static_cast<double>(lcs_length(pred, ref)), static_cast<double>(pred.size()),
                     static_cast<double>(ref.size()));
}

double rouge_score(std::string_view prediction, std::string_view reference) {
    const auto p = rouge_tokens(prediction);
    const auto r = rouge_tokens(reference);
    if (p.empty() && r.empty()) return 1.0;
    return (rouge_n(p, r, 1) + rouge_n(p, r, 2) + rouge_l(p, r)) / 3.0;
}

}  // namespace clipagent
