// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary activation stream. Layout (all little-endian):
//
//   header:  "SAEA" | u32 version (=1) | u32 d_in | u32 encoding (0 = f32)
//   record:  u64 instance_id | u32 token_position | u32 token_id | u32 flags (bit0 = special)
//            | d_in x f32 activation
//
// There is no record count; the stream ends at EOF on a record boundary.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fastsae/corpus.hpp"

namespace fastsae {

inline constexpr char kStreamMagic[5] = "SAEA";
inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::uint32_t kEncodingF32 = 0;

struct StreamHeader {
    std::uint32_t version = kStreamVersion;
    std::uint32_t d_in = 0;
    std::uint32_t encoding = kEncodingF32;
};

struct RecordMeta {
    std::uint64_t instance_id = 0;
    std::uint32_t token_position = 0;
    TokenId token_id = 0;
    bool is_special = false;

    friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct ActivationRecord {
    RecordMeta meta;
    std::vector<float> activation;

    friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;
};

/// Row-major block of activation rows with per-row metadata.
class ActivationBatch {
public:
    ActivationBatch() = default;
    explicit ActivationBatch(std::size_t d_in) : d_in_(d_in) {}

    std::size_t d_in() const noexcept { return d_in_; }
    std::size_t rows() const noexcept { return meta_.size(); }
    bool empty() const noexcept { return meta_.empty(); }

    std::span<const float> row(std::size_t i) const { return {values_.data() + i * d_in_, d_in_}; }
    std::span<float> row(std::size_t i) { return {values_.data() + i * d_in_, d_in_}; }
    const RecordMeta& meta(std::size_t i) const { return meta_[i]; }
    std::span<const float> values() const noexcept { return values_; }
    std::span<const RecordMeta> metas() const noexcept { return meta_; }

    void reserve(std::size_t rows);
    void clear();
    void append(const RecordMeta& m, std::span<const float> act);
    void append(const ActivationRecord& r) { append(r.meta, r.activation); }
    /// Appends rows [first, first + count) of `other`.
    void append_rows(const ActivationBatch& other, std::size_t first, std::size_t count);
    /// Removes the first `count` rows.
    void erase_front(std::size_t count);
    void swap_rows(std::size_t a, std::size_t b);

    ActivationRecord record(std::size_t i) const;

private:
    std::size_t d_in_ = 0;
    std::vector<float> values_;
    std::vector<RecordMeta> meta_;
};

/// Anything that yields activation rows in order.
class RecordSource {
public:
    virtual ~RecordSource() = default;
    virtual std::size_t d_in() const = 0;
    /// Appends up to max_rows rows to dst. Returns the number appended; 0 means exhausted.
    virtual std::size_t pull(ActivationBatch& dst, std::size_t max_rows) = 0;
};

/// In-memory source over a batch, replayed once.
class BatchSource : public RecordSource {
public:
    explicit BatchSource(ActivationBatch data) : data_(std::move(data)) {}
    std::size_t d_in() const override { return data_.d_in(); }
    std::size_t pull(ActivationBatch& dst, std::size_t max_rows) override;

private:
    ActivationBatch data_;
    std::size_t pos_ = 0;
};

class StreamWriter {
public:
    StreamWriter(std::ostream& os, std::uint32_t d_in);
    void write(const RecordMeta& meta, std::span<const float> activation);
    void write(const ActivationRecord& r) { write(r.meta, r.activation); }
    void write(const ActivationBatch& batch);
    std::uint32_t d_in() const noexcept { return d_in_; }
    std::uint64_t records_written() const noexcept { return count_; }

private:
    std::ostream* os_;
    std::uint32_t d_in_;
    std::uint64_t count_ = 0;
};

class StreamReader : public RecordSource {
public:
    /// Reads and validates the header.
    explicit StreamReader(std::istream& is);

    const StreamHeader& header() const noexcept { return header_; }
    std::size_t d_in() const override { return header_.d_in; }

    std::optional<ActivationRecord> next();
    std::size_t pull(ActivationBatch& dst, std::size_t max_rows) override;

private:
    bool read_one(RecordMeta& meta, std::span<float> act);

    std::istream* is_;
    StreamHeader header_;
};

/// StreamReader that owns its file.
class StreamFileReader : public RecordSource {
public:
    explicit StreamFileReader(const std::filesystem::path& path);
    const StreamHeader& header() const noexcept { return reader_->header(); }
    std::size_t d_in() const override { return reader_->d_in(); }
    std::size_t pull(ActivationBatch& dst, std::size_t max_rows) override { return reader_->pull(dst, max_rows); }
    std::optional<ActivationRecord> next() { return reader_->next(); }

private:
    std::ifstream file_;
    std::unique_ptr<StreamReader> reader_;
};

std::vector<ActivationRecord> read_stream(std::istream& is);
void write_stream(std::ostream& os, std::uint32_t d_in, const std::vector<ActivationRecord>& records);

/// Reads a whole source into one batch.
ActivationBatch collect(RecordSource& src);

/// Consecutive rows sharing an instance_id, as one evaluation sequence.
struct ActivationSequence {
    std::uint64_t id = 0;
    ActivationBatch rows;
};

/// Groups a source into sequences by runs of equal instance_id.
std::vector<ActivationSequence> read_sequences(RecordSource& src);

}  // namespace fastsae
