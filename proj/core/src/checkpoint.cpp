#include <cstring>
#include <fstream>
#include <vector>

#include "cryosr/errors.hpp"
#include "cryosr/srnet.hpp"

namespace cryosr {

namespace {

constexpr char kMagic[4] = {'C', 'Z', 'S', 'R'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}

void put_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

uint64_t write_params(std::ostream& os, std::vector<ParamRef>& refs) {
    uint64_t n = 0;
    for (const ParamRef& p : refs) {
        os.write(reinterpret_cast<const char*>(p.w),
                 static_cast<std::streamsize>(p.n * sizeof(float)));
        n += p.n;
    }
    return n;
}

void read_params(std::istream& is, std::vector<ParamRef>& refs,
                 uint64_t expected, const std::string& path) {
    uint64_t n = 0;
    for (const ParamRef& p : refs) n += p.n;
    if (n != expected)
        throw io_error("checkpoint parameter count mismatch in " + path);
    for (const ParamRef& p : refs) {
        is.read(reinterpret_cast<char*>(p.w),
                static_cast<std::streamsize>(p.n * sizeof(float)));
        if (!is) throw io_error("truncated checkpoint " + path);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, SrModel& sr, ShiftModel& shift) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path + " for writing");

    std::vector<ParamRef> sr_refs, shift_refs;
    sr.collect_params(sr_refs);
    shift.collect_params(shift_refs);
    uint64_t sr_n = 0, shift_n = 0;
    for (const ParamRef& p : sr_refs) sr_n += p.n;
    for (const ParamRef& p : shift_refs) shift_n += p.n;

    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(sr.hp.channels));
    put_u32(os, static_cast<uint32_t>(sr.hp.blocks));
    put_u32(os, static_cast<uint32_t>(sr.hp.scale));
    put_u32(os, static_cast<uint32_t>(shift.channels));
    put_f64(os, shift.bound);
    put_u64(os, sr_n);
    put_u64(os, shift_n);
    write_params(os, sr_refs);
    write_params(os, shift_refs);
    if (!os) throw io_error("write failed for " + path);
}

std::pair<SrModel, ShiftModel> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path);

    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("bad checkpoint magic in " + path);
    uint32_t version = get_u32(is);
    if (version != kVersion)
        throw io_error("unsupported checkpoint version in " + path);

    SrHyper hp;
    hp.channels = static_cast<int>(get_u32(is));
    hp.blocks = static_cast<int>(get_u32(is));
    hp.scale = static_cast<int>(get_u32(is));
    int shift_channels = static_cast<int>(get_u32(is));
    double shift_bound = get_f64(is);
    uint64_t sr_n = get_u64(is);
    uint64_t shift_n = get_u64(is);
    if (!is) throw io_error("truncated checkpoint " + path);

    SrModel sr = SrModel::init(hp, 0);
    ShiftModel shift = ShiftModel::init(shift_channels, shift_bound, 0);
    std::vector<ParamRef> sr_refs, shift_refs;
    sr.collect_params(sr_refs);
    shift.collect_params(shift_refs);
    read_params(is, sr_refs, sr_n, path);
    read_params(is, shift_refs, shift_n, path);
    return {std::move(sr), std::move(shift)};
}

}  // namespace cryosr
