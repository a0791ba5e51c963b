#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "mswave/dictionary.hpp"
#include "mswave/snapshot.hpp"
#include "mswave/switching.hpp"
#include "mswave/synth.hpp"

namespace mswave::io {

/// Metadata carried next to snapshot values (which physical field, and the
/// noise parameters when the field is an observation).
struct FieldMeta {
    std::string field = "u";
    double eta = 0.0;
    std::uint64_t seed = 0;
};

// --- snapshot, long-form CSV ------------------------------------------------
// '#' meta lines (field/eta/seed, segment starts), then header "x[,y],t,u";
// one row per sample ordered by t, then y, then x. %.17g throughout, so a
// write/read round trip is bit-exact.
void write_snapshot_csv(const Snapshot& s, std::ostream& out, const FieldMeta& meta = {});
Snapshot read_snapshot_csv(std::istream& in, FieldMeta* meta = nullptr);

// --- snapshot, binary container ----------------------------------------------
// Little-endian, magic "MSWSNAP1": version, space dims, axis lengths,
// noise meta, field tag, axes, segment starts, then raw value blocks in
// storage order (one space block per time level). Bit-exact round trip.
void write_snapshot_bin(const Snapshot& s, std::ostream& out, const FieldMeta& meta = {});
Snapshot read_snapshot_bin(std::istream& in, FieldMeta* meta = nullptr);

// --- file helpers (throw IoError when the file cannot be opened) -------------
void save_snapshot_csv(const Snapshot& s, const std::filesystem::path& p, const FieldMeta& m = {});
Snapshot load_snapshot_csv(const std::filesystem::path& p, FieldMeta* meta = nullptr);
void save_snapshot_bin(const Snapshot& s, const std::filesystem::path& p, const FieldMeta& m = {});
Snapshot load_snapshot_bin(const std::filesystem::path& p, FieldMeta* meta = nullptr);

void save_path_csv(const switching::MarkovPath& path, const std::filesystem::path& p);
switching::MarkovPath load_path_csv(const std::filesystem::path& p);

/// Per-segment design matrix for external inspection:
/// header "x[,y],t,target,<term labels...>".
void write_design_csv(const dict::DesignSystem& sys, const synth::DerivativeFields& fields,
                      std::ostream& out);

/// All derivative fields, long form: "field,x[,y],t,value".
void write_fields_csv(const synth::DerivativeFields& fields, std::ostream& out);

}  // namespace mswave::io
