#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace neu::text {

// Case folding: ASCII A-Z lowered, other UTF-8 sequences passed through.
// Inputs are assumed NFC-normalized; the synthetic corpora are ASCII.
std::string casefold(const std::string& s);

// Strip punctuation from token edges (ASCII punctuation only; interior
// characters such as the apostrophe in "don't" are kept).
std::string strip_edge_punct(const std::string& token);

// casefold + strip edge punctuation for a single token; may come back empty
std::string normalize_token(const std::string& token);

// Whitespace-split, casefold, strip edge punctuation, drop empties.
std::vector<std::string> normalize_tokens(const std::string& s);

// Normalize an already-tokenized sequence the same way.
std::vector<std::string> normalize_tokens(const std::vector<std::string>& toks);

std::string join(const std::vector<std::string>& toks, const std::string& sep = " ");

// UTF-8 decode to codepoints; bad bytes decode as U+FFFD rather than throwing.
std::vector<uint32_t> codepoints(const std::string& s);

// Split into per-codepoint UTF-8 strings (character units for char models).
std::vector<std::string> char_split(const std::string& s);

}  // namespace neu::text
