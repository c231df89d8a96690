#include "gsn/bits.hpp"

#include <fstream>

namespace gsn {

BitStream bits_from_bytes(const std::vector<std::uint8_t>& bytes) {
    BitStream bs;
    bs.bits.reserve(bytes.size() * 8);
    for (std::uint8_t b : bytes)
        for (int k = 7; k >= 0; --k) bs.bits.push_back((b >> k) & 1);
    return bs;
}

std::vector<std::uint8_t> bytes_from_bits(const BitStream& bs) {
    std::vector<std::uint8_t> bytes((bs.bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bs.bits.size(); ++i) {
        GSN_CHECK(bs.bits[i] <= 1, "bitstream entry " << i << " is not binary");
        if (bs.bits[i]) bytes[i / 8] |= (std::uint8_t)(1u << (7 - i % 8));
    }
    return bytes;
}

BitStream load_bits(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    GSN_CHECK(f.good(), "cannot open payload file " << path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bits_from_bytes(bytes);
}

void save_bits(const BitStream& bs, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    GSN_CHECK(f.good(), "cannot write payload file " << path);
    auto bytes = bytes_from_bits(bs);
    f.write((const char*)bytes.data(), (std::streamsize)bytes.size());
    GSN_CHECK(f.good(), "write failed for payload file " << path);
}

}  // namespace gsn
