// SPDX-License-Identifier: Apache-2.0
#include "fastsae/actstream.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "fastsae/detail/binary_io.hpp"
#include "fastsae/error.hpp"

namespace fastsae {

using detail::get_le;
using detail::put_le;

void ActivationBatch::reserve(std::size_t rows) {
    values_.reserve(rows * d_in_);
    meta_.reserve(rows);
}

void ActivationBatch::clear() {
    values_.clear();
    meta_.clear();
}

void ActivationBatch::append(const RecordMeta& m, std::span<const float> act) {
    if (act.size() != d_in_) {
        throw FormatError("activation length " + std::to_string(act.size()) + " != d_in " +
                          std::to_string(d_in_));
    }
    values_.insert(values_.end(), act.begin(), act.end());
    meta_.push_back(m);
}

void ActivationBatch::append_rows(const ActivationBatch& other, std::size_t first, std::size_t count) {
    if (other.d_in_ != d_in_) throw FormatError("append_rows: d_in mismatch");
    if (first + count > other.rows()) throw ContractError("append_rows: range out of bounds");
    values_.insert(values_.end(), other.values_.begin() + first * d_in_,
                   other.values_.begin() + (first + count) * d_in_);
    meta_.insert(meta_.end(), other.meta_.begin() + first, other.meta_.begin() + first + count);
}

void ActivationBatch::erase_front(std::size_t count) {
    count = std::min(count, rows());
    values_.erase(values_.begin(), values_.begin() + count * d_in_);
    meta_.erase(meta_.begin(), meta_.begin() + count);
}

void ActivationBatch::swap_rows(std::size_t a, std::size_t b) {
    if (a == b) return;
    std::swap_ranges(values_.begin() + a * d_in_, values_.begin() + (a + 1) * d_in_,
                     values_.begin() + b * d_in_);
    std::swap(meta_[a], meta_[b]);
}

ActivationRecord ActivationBatch::record(std::size_t i) const {
    auto r = row(i);
    return {meta_[i], std::vector<float>(r.begin(), r.end())};
}

std::size_t BatchSource::pull(ActivationBatch& dst, std::size_t max_rows) {
    const std::size_t n = std::min(max_rows, data_.rows() - pos_);
    dst.append_rows(data_, pos_, n);
    pos_ += n;
    return n;
}

// ---------------------------------------------------------------------------

StreamWriter::StreamWriter(std::ostream& os, std::uint32_t d_in) : os_(&os), d_in_(d_in) {
    if (d_in < 1) throw ContractError("stream d_in must be >= 1");
    detail::put_magic(os, kStreamMagic);
    put_le<std::uint32_t>(os, kStreamVersion);
    put_le<std::uint32_t>(os, d_in);
    put_le<std::uint32_t>(os, kEncodingF32);
}

void StreamWriter::write(const RecordMeta& meta, std::span<const float> activation) {
    if (activation.size() != d_in_) {
        throw FormatError("record dimension " + std::to_string(activation.size()) +
                          " does not match stream d_in " + std::to_string(d_in_));
    }
    for (float v : activation) {
        if (!std::isfinite(v)) throw ContractError("non-finite activation value");
    }
    put_le<std::uint64_t>(*os_, meta.instance_id);
    put_le<std::uint32_t>(*os_, meta.token_position);
    put_le<std::uint32_t>(*os_, meta.token_id);
    put_le<std::uint32_t>(*os_, meta.is_special ? 1u : 0u);
    detail::put_f32_array(*os_, activation);
    if (!*os_) throw IoError("activation stream write failed");
    ++count_;
}

void StreamWriter::write(const ActivationBatch& batch) {
    for (std::size_t i = 0; i < batch.rows(); ++i) write(batch.meta(i), batch.row(i));
}

StreamReader::StreamReader(std::istream& is) : is_(&is) {
    detail::expect_magic(is, kStreamMagic, "activation stream");
    header_.version = detail::require_le<std::uint32_t>(is, "stream version");
    if (header_.version != kStreamVersion) {
        throw FormatError("unsupported activation stream version " + std::to_string(header_.version));
    }
    header_.d_in = detail::require_le<std::uint32_t>(is, "stream d_in");
    if (header_.d_in < 1) throw FormatError("activation stream declares d_in = 0");
    header_.encoding = detail::require_le<std::uint32_t>(is, "stream encoding");
    if (header_.encoding != kEncodingF32) {
        throw FormatError("unsupported element encoding " + std::to_string(header_.encoding));
    }
}

bool StreamReader::read_one(RecordMeta& meta, std::span<float> act) {
    std::uint64_t inst{};
    if (!get_le(*is_, inst)) {
        if (is_->gcount() == 0) return false;  // clean EOF
        throw FormatError("truncated record header");
    }
    meta.instance_id = inst;
    meta.token_position = detail::require_le<std::uint32_t>(*is_, "token_position");
    meta.token_id = detail::require_le<std::uint32_t>(*is_, "token_id");
    const auto flags = detail::require_le<std::uint32_t>(*is_, "flags");
    if (flags > 1u) throw FormatError("unknown record flag bits " + std::to_string(flags));
    meta.is_special = (flags & 1u) != 0;
    if (!detail::get_f32_array(*is_, act)) throw FormatError("truncated activation vector");
    for (float v : act) {
        if (!std::isfinite(v)) throw FormatError("non-finite activation value in stream");
    }
    return true;
}

std::optional<ActivationRecord> StreamReader::next() {
    ActivationRecord r;
    r.activation.resize(header_.d_in);
    if (!read_one(r.meta, r.activation)) return std::nullopt;
    return r;
}

std::size_t StreamReader::pull(ActivationBatch& dst, std::size_t max_rows) {
    if (dst.d_in() != header_.d_in) throw FormatError("destination batch d_in mismatch");
    std::vector<float> scratch(header_.d_in);
    RecordMeta meta;
    std::size_t n = 0;
    while (n < max_rows && read_one(meta, scratch)) {
        dst.append(meta, scratch);
        ++n;
    }
    return n;
}

StreamFileReader::StreamFileReader(const std::filesystem::path& path) : file_(path, std::ios::binary) {
    if (!file_) throw IoError("cannot open activation stream " + path.string());
    reader_ = std::make_unique<StreamReader>(file_);
}

std::vector<ActivationRecord> read_stream(std::istream& is) {
    StreamReader reader(is);
    std::vector<ActivationRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

void write_stream(std::ostream& os, std::uint32_t d_in, const std::vector<ActivationRecord>& records) {
    StreamWriter w(os, d_in);
    for (const auto& r : records) w.write(r);
}

ActivationBatch collect(RecordSource& src) {
    ActivationBatch all(src.d_in());
    while (src.pull(all, 4096) > 0) {
    }
    return all;
}

std::vector<ActivationSequence> read_sequences(RecordSource& src) {
    std::vector<ActivationSequence> out;
    ActivationBatch chunk(src.d_in());
    while (src.pull(chunk, 4096) > 0) {
        for (std::size_t i = 0; i < chunk.rows(); ++i) {
            const auto id = chunk.meta(i).instance_id;
            if (out.empty() || out.back().id != id) {
                out.push_back({id, ActivationBatch(src.d_in())});
            }
            out.back().rows.append(chunk.meta(i), chunk.row(i));
        }
        chunk.clear();
    }
    return out;
}

}  // namespace fastsae
