#include "causal/digest.hpp"

#include <array>
#include <fstream>

#include "causal/errors.hpp"

namespace causal {

std::string Digest::hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state_;
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

std::string digest_bytes(std::string_view bytes) {
    Digest d;
    d.update(bytes);
    return d.hex();
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file for digest: " + path);
    }
    Digest d;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        d.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
    return d.hex();
}

}  // namespace causal
