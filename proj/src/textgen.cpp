#include "wesar/textgen.hpp"

#include <array>

#include "wesar/rng.hpp"

namespace wesar {

namespace {

// Common words with repeats so uniform sampling over the array produces a
// skewed (roughly Zipfian) unigram distribution.
constexpr std::array<const char*, 120> kWords = {
    "the",     "the",     "the",      "the",    "of",      "of",      "and",    "and",
    "a",       "a",       "to",       "to",     "in",      "in",      "is",     "was",
    "it",      "for",     "on",       "as",     "with",    "his",     "they",   "be",
    "at",      "one",     "have",     "this",   "from",    "or",      "had",    "by",
    "not",     "word",    "but",      "what",   "some",    "we",      "can",    "out",
    "other",   "were",    "all",      "there",  "when",    "up",      "use",    "your",
    "how",     "said",    "an",       "each",   "she",     "which",   "do",     "their",
    "time",    "if",      "will",     "way",    "about",   "many",    "then",   "them",
    "write",   "would",   "like",     "so",     "these",   "her",     "long",   "make",
    "thing",   "see",     "him",      "two",    "has",     "look",    "more",   "day",
    "could",   "go",      "come",     "did",    "number",  "sound",   "no",     "most",
    "people",  "my",      "over",     "know",   "water",   "than",    "call",   "first",
    "who",     "may",     "down",     "side",   "been",    "now",     "find",   "any",
    "new",     "work",    "part",     "take",   "get",     "place",   "made",   "live",
    "where",   "after",   "back",     "little", "only",    "round",   "man",    "year",
};

}  // namespace

std::string generate_corpus(std::uint64_t seed, std::size_t min_bytes) {
    Rng rng = Rng(seed).split("corpus");
    std::string out;
    out.reserve(min_bytes + 256);
    std::size_t sentences_in_paragraph = 0;
    std::size_t paragraph_target = 20 + bounded_u64(rng, 20);
    while (out.size() < min_bytes) {
        std::size_t nwords = 4 + bounded_u64(rng, 10);
        for (std::size_t w = 0; w < nwords; ++w) {
            const char* word = kWords[bounded_u64(rng, kWords.size())];
            if (w == 0) {
                out += static_cast<char>(word[0] - 'a' + 'A');
                out += word + 1;
            } else {
                out += word;
            }
            if (w + 1 < nwords) {
                // An occasional comma keeps punctuation from being trivial.
                if (bounded_u64(rng, 8) == 0) out += ',';
                out += ' ';
            }
        }
        out += '.';
        if (++sentences_in_paragraph >= paragraph_target) {
            out += "\n\n";
            sentences_in_paragraph = 0;
            paragraph_target = 20 + bounded_u64(rng, 20);
        } else {
            out += ' ';
        }
    }
    return out;
}

}  // namespace wesar
