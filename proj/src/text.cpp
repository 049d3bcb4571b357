#include "neu/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace neu::text {

std::string casefold(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        out.push_back(static_cast<char>(c));
    }
    return out;
}

static bool is_edge_punct(unsigned char c) {
    return std::ispunct(c) != 0;
}

std::string strip_edge_punct(const std::string& token) {
    size_t b = 0, e = token.size();
    while (b < e && static_cast<unsigned char>(token[b]) < 0x80 && is_edge_punct(token[b])) ++b;
    while (e > b && static_cast<unsigned char>(token[e - 1]) < 0x80 && is_edge_punct(token[e - 1])) --e;
    return token.substr(b, e - b);
}

std::string normalize_token(const std::string& token) {
    return strip_edge_punct(casefold(token));
}

std::vector<std::string> normalize_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
        std::string t = normalize_token(tok);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<std::string> normalize_tokens(const std::vector<std::string>& toks) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (const auto& tok : toks) {
        std::string t = normalize_token(tok);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string join(const std::vector<std::string>& toks, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) out += sep;
        out += toks[i];
    }
    return out;
}

std::vector<std::string> char_split(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t len = 1;
        if ((c >> 5) == 0x6) len = 2;
        else if ((c >> 4) == 0xE) len = 3;
        else if ((c >> 3) == 0x1E) len = 4;
        len = std::min(len, n - i);
        out.push_back(s.substr(i, len));
        i += len;
    }
    return out;
}

std::vector<uint32_t> codepoints(const std::string& s) {
    std::vector<uint32_t> cps;
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        uint32_t cp = 0xFFFD;
        size_t len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c >> 5) == 0x6 && i + 1 < n) {
            cp = (c & 0x1F) << 6 | (s[i + 1] & 0x3F);
            len = 2;
        } else if ((c >> 4) == 0xE && i + 2 < n) {
            cp = (c & 0x0F) << 12 | (s[i + 1] & 0x3F) << 6 | (s[i + 2] & 0x3F);
            len = 3;
        } else if ((c >> 3) == 0x1E && i + 3 < n) {
            cp = (c & 0x07) << 18 | (s[i + 1] & 0x3F) << 12 | (s[i + 2] & 0x3F) << 6 |
                 (s[i + 3] & 0x3F);
            len = 4;
        }
        cps.push_back(cp);
        i += len;
    }
    return cps;
}

}  // namespace neu::text
