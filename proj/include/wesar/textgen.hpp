// Deterministic pseudo-English corpus generator.  The output has real
// byte-level structure (a skewed word distribution, capitalization,
// punctuation, paragraph breaks) so a byte model has something to learn,
// while depending on nothing but the seed.
#pragma once

#include <cstdint>
#include <string>

namespace wesar {

// At least min_bytes of text, ending at a sentence boundary.  The same
// (seed, min_bytes) pair yields identical bytes on every platform.
std::string generate_corpus(std::uint64_t seed, std::size_t min_bytes);

}  // namespace wesar
