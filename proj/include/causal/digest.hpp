#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace causal {

// 64-bit FNV-1a over a byte stream. Used for dataset/model/design provenance
// digests; collision resistance beyond accidental mixups is not a goal.
class Digest {
public:
    Digest() = default;

    void update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= static_cast<std::uint64_t>(c);
            state_ *= 1099511628211ULL;
        }
    }

    void update_u64(std::uint64_t v) {
        for (int shift = 56; shift >= 0; shift -= 8) {
            state_ ^= (v >> shift) & 0xFFu;
            state_ *= 1099511628211ULL;
        }
    }

    std::uint64_t value() const { return state_; }

    std::string hex() const;

private:
    std::uint64_t state_ = 14695981039346656037ULL;
};

std::string digest_bytes(std::string_view bytes);
std::string digest_file(const std::string& path);

}  // namespace causal
