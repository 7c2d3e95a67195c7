#include "raptor/nifti_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <vector>

namespace raptor {

namespace {

// NIfTI-1 header, 348 bytes.
#pragma pack(push, 1)
struct NiftiHeader {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;
constexpr std::int16_t NIFTI_INTENT_VECTOR = 1007;

class GzReader {
public:
    explicit GzReader(const std::string& path) : path_(path) {
        if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
        file_ = gzopen(path.c_str(), "rb");
        if (!file_) throw IoError("cannot open " + path);
    }
    ~GzReader() {
        if (file_) gzclose(file_);
    }
    GzReader(const GzReader&) = delete;
    GzReader& operator=(const GzReader&) = delete;

    void read_exact(void* dst, std::size_t bytes, const char* what) {
        const int got = gzread(file_, dst, static_cast<unsigned>(bytes));
        if (got < 0 || static_cast<std::size_t>(got) != bytes)
            throw IoError(path_ + ": truncated file while reading " + what + " (wanted " +
                          std::to_string(bytes) + " bytes at offset " + std::to_string(offset_) +
                          ", got " + std::to_string(std::max(got, 0)) + ")");
        offset_ += bytes;
    }
    void skip(std::size_t bytes) {
        std::vector<char> sink(std::min<std::size_t>(bytes, 1 << 16));
        std::size_t left = bytes;
        while (left > 0) {
            const std::size_t chunk = std::min(left, sink.size());
            read_exact(sink.data(), chunk, "extension bytes");
            left -= chunk;
        }
    }
    std::size_t offset() const { return offset_; }

private:
    std::string path_;
    gzFile file_ = nullptr;
    std::size_t offset_ = 0;
};

class GzWriter {
public:
    GzWriter(const std::string& path, bool compress) {
        // "T" writes transparently (no gzip framing) for plain .nii output
        file_ = gzopen(path.c_str(), compress ? "wb" : "wbT");
        if (!file_) throw IoError("cannot open " + path + " for writing");
    }
    ~GzWriter() {
        if (file_) gzclose(file_);
    }
    GzWriter(const GzWriter&) = delete;
    GzWriter& operator=(const GzWriter&) = delete;

    void write(const void* src, std::size_t bytes) {
        if (gzwrite(file_, src, static_cast<unsigned>(bytes)) != static_cast<int>(bytes))
            throw IoError("short write to NIfTI file");
    }

private:
    gzFile file_ = nullptr;
};

bool ends_with_gz(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

template <typename T>
void swap_bytes(T& v) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
}

void swap_header(NiftiHeader& h) {
    swap_bytes(h.sizeof_hdr);
    for (auto& d : h.dim) swap_bytes(d);
    swap_bytes(h.intent_p1);
    swap_bytes(h.intent_p2);
    swap_bytes(h.intent_p3);
    swap_bytes(h.intent_code);
    swap_bytes(h.datatype);
    swap_bytes(h.bitpix);
    swap_bytes(h.slice_start);
    for (auto& p : h.pixdim) swap_bytes(p);
    swap_bytes(h.vox_offset);
    swap_bytes(h.scl_slope);
    swap_bytes(h.scl_inter);
    swap_bytes(h.slice_end);
    swap_bytes(h.cal_max);
    swap_bytes(h.cal_min);
    swap_bytes(h.slice_duration);
    swap_bytes(h.toffset);
    swap_bytes(h.glmax);
    swap_bytes(h.glmin);
    swap_bytes(h.qform_code);
    swap_bytes(h.sform_code);
    swap_bytes(h.quatern_b);
    swap_bytes(h.quatern_c);
    swap_bytes(h.quatern_d);
    swap_bytes(h.qoffset_x);
    swap_bytes(h.qoffset_y);
    swap_bytes(h.qoffset_z);
    for (auto& v : h.srow_x) swap_bytes(v);
    for (auto& v : h.srow_y) swap_bytes(v);
    for (auto& v : h.srow_z) swap_bytes(v);
}

struct ParsedVolume {
    Dims dims;
    Vec3 spacing;
    Vec3 origin;
    int components = 1;
    std::vector<double> values; // component-major when components > 1
};

template <typename T>
void read_typed(GzReader& in, std::size_t count, bool swapped, double slope, double inter,
                std::vector<double>& out) {
    std::vector<T> buf(count);
    in.read_exact(buf.data(), count * sizeof(T), "voxel data");
    out.resize(count);
    for (std::size_t n = 0; n < count; ++n) {
        T v = buf[n];
        if (swapped && sizeof(T) > 1) swap_bytes(v);
        out[n] = slope * static_cast<double>(v) + inter;
    }
}

ParsedVolume read_nifti(const std::string& path, bool expect_vector) {
    GzReader in(path);
    NiftiHeader h{};
    in.read_exact(&h, sizeof(h), "header");

    bool swapped = false;
    if (h.sizeof_hdr != 348) {
        std::int32_t test = h.sizeof_hdr;
        swap_bytes(test);
        if (test != 348)
            throw IoError(path + ": malformed header, sizeof_hdr is " + std::to_string(h.sizeof_hdr) +
                          " at byte offset 0 (expected 348)");
        swapped = true;
        swap_header(h);
    }

    if (std::strncmp(h.magic, "n+1", 3) != 0) {
        if (std::strncmp(h.magic, "ni1", 3) == 0)
            throw IoError(path + ": two-file NIfTI (hdr/img pairs) is not supported, magic at byte offset 344");
        throw IoError(path + ": bad magic at byte offset 344 (expected \"n+1\")");
    }

    if (h.dim[0] < 1 || h.dim[0] > 7)
        throw IoError(path + ": invalid dim[0]=" + std::to_string(h.dim[0]) +
                      " at byte offset 40");
    for (int d = 1; d <= 3; ++d)
        if (h.dim[d] < 1)
            throw IoError(path + ": invalid spatial dim[" + std::to_string(d) + "]=" +
                          std::to_string(h.dim[d]) + " at byte offset " + std::to_string(40 + 2 * d));

    ParsedVolume out;
    out.dims = {h.dim[1], h.dim[2], h.dim[3]};
    for (int d = 0; d < 3; ++d) {
        const float p = h.pixdim[d + 1];
        out.spacing[d] = p > 0.0f ? static_cast<double>(p) : 1.0;
    }
    out.origin = {0.0, 0.0, 0.0};
    if (h.sform_code > 0) out.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    else if (h.qform_code > 0) out.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};

    const int dim4 = h.dim[0] >= 4 ? std::max<int>(h.dim[4], 1) : 1;
    const int dim5 = h.dim[0] >= 5 ? std::max<int>(h.dim[5], 1) : 1;
    if (expect_vector) {
        if (dim5 != 3 || dim4 != 1)
            throw IoError(path + ": expected a 3-component vector image (dim[4]=1, dim[5]=3), got dim[4]=" +
                          std::to_string(dim4) + ", dim[5]=" + std::to_string(dim5));
        out.components = 3;
    } else if (dim4 != 1 || dim5 != 1) {
        throw IoError(path + ": expected a scalar volume, got dim[4]=" + std::to_string(dim4) +
                      ", dim[5]=" + std::to_string(dim5));
    }

    const double slope = (h.scl_slope == 0.0f || !std::isfinite(h.scl_slope))
                             ? 1.0
                             : static_cast<double>(h.scl_slope);
    const double inter = std::isfinite(h.scl_inter) ? static_cast<double>(h.scl_inter) : 0.0;

    const std::size_t offset = static_cast<std::size_t>(std::max(h.vox_offset, 348.0f));
    if (offset > sizeof(NiftiHeader)) in.skip(offset - sizeof(NiftiHeader));

    const std::size_t count = voxel_count(out.dims) * static_cast<std::size_t>(out.components);
    switch (h.datatype) {
        case DT_UINT8:
            read_typed<std::uint8_t>(in, count, swapped, slope, inter, out.values);
            break;
        case DT_INT16:
            read_typed<std::int16_t>(in, count, swapped, slope, inter, out.values);
            break;
        case DT_INT32:
            read_typed<std::int32_t>(in, count, swapped, slope, inter, out.values);
            break;
        case DT_FLOAT32:
            read_typed<float>(in, count, swapped, slope, inter, out.values);
            break;
        case DT_FLOAT64:
            read_typed<double>(in, count, swapped, slope, inter, out.values);
            break;
        default:
            throw IoError(path + ": unsupported NIfTI datatype code " + std::to_string(h.datatype));
    }
    return out;
}

NiftiHeader make_header(const Dims& dims, const Vec3& spacing, const Vec3& origin,
                        std::int16_t datatype, std::int16_t bitpix, int components) {
    NiftiHeader h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = components > 1 ? 5 : 3;
    h.dim[1] = static_cast<std::int16_t>(dims[0]);
    h.dim[2] = static_cast<std::int16_t>(dims[1]);
    h.dim[3] = static_cast<std::int16_t>(dims[2]);
    h.dim[4] = 1;
    h.dim[5] = static_cast<std::int16_t>(components > 1 ? components : 1);
    h.dim[6] = 1;
    h.dim[7] = 1;
    if (components > 1) h.intent_code = NIFTI_INTENT_VECTOR;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    for (int d = 0; d < 3; ++d) h.pixdim[d + 1] = static_cast<float>(spacing[d]);
    h.pixdim[4] = h.pixdim[5] = h.pixdim[6] = h.pixdim[7] = 1.0f;
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.sform_code = 1;
    h.srow_x[0] = static_cast<float>(spacing[0]);
    h.srow_y[1] = static_cast<float>(spacing[1]);
    h.srow_z[2] = static_cast<float>(spacing[2]);
    h.srow_x[3] = static_cast<float>(origin[0]);
    h.srow_y[3] = static_cast<float>(origin[1]);
    h.srow_z[3] = static_cast<float>(origin[2]);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

void write_nifti(const std::string& path, const NiftiHeader& h, const void* data,
                 std::size_t bytes) {
    GzWriter out(path, ends_with_gz(path));
    out.write(&h, sizeof(h));
    const char pad[4] = {0, 0, 0, 0};
    out.write(pad, 4); // to vox_offset = 352
    out.write(data, bytes);
}

} // namespace

Volume read_volume(const std::string& path) {
    ParsedVolume p = read_nifti(path, /*expect_vector=*/false);
    return Volume(p.dims, p.spacing, p.origin, std::move(p.values));
}

void write_volume(const Volume& v, const std::string& path) {
    const NiftiHeader h = make_header(v.dims(), v.spacing(), v.origin(), DT_FLOAT32, 32, 1);
    std::vector<float> buf(v.size());
    for (std::size_t n = 0; n < v.size(); ++n) buf[n] = static_cast<float>(v[n]);
    write_nifti(path, h, buf.data(), buf.size() * sizeof(float));
}

LabelMap read_label_map(const std::string& path) {
    ParsedVolume p = read_nifti(path, /*expect_vector=*/false);
    std::vector<std::int32_t> labels(p.values.size());
    for (std::size_t n = 0; n < labels.size(); ++n)
        labels[n] = static_cast<std::int32_t>(std::lround(p.values[n]));
    return LabelMap(p.dims, p.spacing, p.origin, std::move(labels));
}

void write_label_map(const LabelMap& m, const std::string& path) {
    const NiftiHeader h = make_header(m.dims(), m.spacing(), m.origin(), DT_INT32, 32, 1);
    write_nifti(path, h, m.data().data(), m.size() * sizeof(std::int32_t));
}

DisplacementField read_displacement_field(const std::string& path) {
    ParsedVolume p = read_nifti(path, /*expect_vector=*/true);
    DisplacementField d(p.dims, p.spacing, p.origin);
    const std::size_t n = voxel_count(p.dims);
    for (int c = 0; c < 3; ++c)
        std::copy(p.values.begin() + c * n, p.values.begin() + (c + 1) * n,
                  d.component(c).begin());
    return d;
}

void write_displacement_field(const DisplacementField& d, const std::string& path) {
    const NiftiHeader h = make_header(d.dims(), d.spacing(), d.origin(), DT_FLOAT32, 32, 3);
    std::vector<float> buf(3 * d.size());
    for (int c = 0; c < 3; ++c)
        for (std::size_t n = 0; n < d.size(); ++n)
            buf[c * d.size() + n] = static_cast<float>(d.component(c)[n]);
    write_nifti(path, h, buf.data(), buf.size() * sizeof(float));
}

} // namespace raptor
