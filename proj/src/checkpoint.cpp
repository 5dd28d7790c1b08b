#include "cpnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cpnet {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'N', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kCheckpointVersion);
    put_u64(os, store.size());
    for (const auto& name : store.names()) {
        const Tensor& t = store.get(name);
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u64(os, static_cast<std::uint64_t>(t.extent(i)));
        for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(os, t.value_at(i));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    }
    const std::uint32_t version = get_u32(is);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint64_t count = get_u64(is);
    if (count != store.size()) {
        throw std::runtime_error("checkpoint: parameter count " + std::to_string(count) +
                                 " does not match model (" + std::to_string(store.size()) + ")");
    }
    for (std::uint64_t p = 0; p < count; ++p) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        if (!store.has(name)) {
            throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        }
        const std::uint32_t rank = get_u32(is);
        Shape shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(get_u64(is));
        if (shape != store.get(name).shape()) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file " +
                                     shape_to_string(shape) + " vs model " +
                                     shape_to_string(store.get(name).shape()));
        }
        Array v(shape_numel(shape));
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_f64(is);
        store.set(name, Tensor(std::move(shape), std::move(v)));
    }
}

}  // namespace cpnet
