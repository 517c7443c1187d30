#pragma once

// Little-endian primitive encoding shared by the AHGF and AHGC formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ahgcn::detail {

template <typename T>
void put_le(std::ostream& out, T value) {
    using U = std::make_unsigned_t<T>;
    U bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.put(static_cast<char>(bits & 0xFFu));
        bits = static_cast<U>(bits >> 8);
    }
}

inline void put_f32(std::ostream& out, double value) {
    put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

class LeReader {
public:
    LeReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    template <typename T>
    T get() {
        using U = std::make_unsigned_t<T>;
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            const int ch = in_.get();
            if (ch == std::char_traits<char>::eof()) fail("unexpected end of file");
            bits = static_cast<U>(bits | (static_cast<U>(static_cast<unsigned char>(ch)) << (8 * i)));
        }
        return static_cast<T>(bits);
    }

    double get_f32() { return static_cast<double>(std::bit_cast<float>(get<std::uint32_t>())); }

    std::string get_bytes(std::size_t n) {
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) fail("unexpected end of file");
        return s;
    }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error(source_ + ": " + what);
    }

private:
    std::istream& in_;
    std::string source_;
};

}  // namespace ahgcn::detail
