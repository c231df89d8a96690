#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gsn/tape.hpp"

namespace gsn {
namespace ckpt {

// Native-endian binary records; checkpoints are machine-local artifacts.

inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_i64(std::ostream& os, std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    GSN_CHECK(is.good(), "checkpoint truncated while reading an integer");
    return v;
}

inline std::int64_t read_i64(std::istream& is) {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    GSN_CHECK(is.good(), "checkpoint truncated while reading an integer");
    return v;
}

inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    GSN_CHECK(is.good(), "checkpoint truncated while reading a real");
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), (std::streamsize)s.size());
}

inline std::string read_string(std::istream& is) {
    std::uint64_t n = read_u64(is);
    GSN_CHECK(n <= (1ull << 30), "checkpoint string length " << n << " is implausible");
    std::string s((std::size_t)n, '\0');
    is.read(s.data(), (std::streamsize)n);
    GSN_CHECK(is.good(), "checkpoint truncated while reading a string");
    return s;
}

template <typename S>
void write_tensor(std::ostream& os, const Tensor<S>& t) {
    write_u64(os, sizeof(S));
    write_u64(os, t.dims.size());
    for (Index d : t.dims) write_i64(os, d);
    os.write(reinterpret_cast<const char*>(t.data()), (std::streamsize)(sizeof(S) * (std::size_t)t.numel()));
}

template <typename S>
Tensor<S> read_tensor(std::istream& is) {
    std::uint64_t esz = read_u64(is);
    GSN_CHECK(esz == sizeof(S), "checkpoint scalar width " << esz << " does not match build width "
                                                           << sizeof(S));
    std::uint64_t rank = read_u64(is);
    GSN_CHECK(rank <= 8, "checkpoint tensor rank " << rank << " is implausible");
    Shape dims;
    for (std::uint64_t i = 0; i < rank; ++i) dims.push_back(read_i64(is));
    Tensor<S> t(dims);
    is.read(reinterpret_cast<char*>(t.data()), (std::streamsize)(sizeof(S) * (std::size_t)t.numel()));
    GSN_CHECK(is.good(), "checkpoint truncated while reading tensor data");
    return t;
}

/// One network section: named parameter tensors, enumeration order fixed.
template <typename S>
void write_params(std::ostream& os, const std::string& section, const std::vector<Param<S>*>& ps) {
    write_string(os, section);
    write_u64(os, ps.size());
    for (const Param<S>* p : ps) {
        write_string(os, p->name);
        write_tensor(os, p->value);
    }
}

template <typename S>
void read_params(std::istream& is, const std::string& section, const std::vector<Param<S>*>& ps) {
    std::string got = read_string(is);
    GSN_CHECK(got == section, "expected checkpoint section " << section << ", found " << got);
    std::uint64_t n = read_u64(is);
    GSN_CHECK(n == ps.size(),
              "section " << section << " holds " << n << " parameters, network has " << ps.size());
    for (Param<S>* p : ps) {
        std::string name = read_string(is);
        GSN_CHECK(name == p->name, "parameter order mismatch: expected " << p->name << ", found " << name);
        Tensor<S> v = read_tensor<S>(is);
        GSN_CHECK(v.same_shape(p->value), "parameter " << name << " has shape " << shape_str(v.dims)
                                                       << ", expected " << shape_str(p->value.dims));
        p->value = std::move(v);
    }
}

}  // namespace ckpt
}  // namespace gsn
