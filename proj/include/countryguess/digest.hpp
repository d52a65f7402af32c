#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "error.hpp"
#include "image.hpp"

namespace countryguess {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(const void* data, std::size_t n) {
        EVP_DigestUpdate(ctx_, data, n);
        return *this;
    }
    Sha256& update(std::string_view s) { return update(s.data(), s.size()); }

    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_, md.data(), &len);
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(digits[md[i] >> 4]);
            out.push_back(digits[md[i] & 0xF]);
        }
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view data) { return Sha256().update(data).hex(); }

/// Content digest of decoded pixels: independent of the container format the image came in.
inline std::string image_digest(const RgbImage& img) {
    Sha256 h;
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(img.width()), static_cast<std::uint32_t>(img.height())};
    unsigned char le[8];
    for (int k = 0; k < 2; ++k)
        for (int b = 0; b < 4; ++b) le[4 * k + b] = static_cast<unsigned char>(dims[k] >> (8 * b));
    h.update(le, sizeof le);
    static_assert(sizeof(Rgb) == 3);
    h.update(img.pixels().data(), img.pixel_count() * sizeof(Rgb));
    return h.hex();
}

} // namespace countryguess
