#include "cmib/data/bvh.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

#include "cmib/geom/quaternion.hpp"

namespace cmib::data {

using geom::Quat;
using geom::Vec3;

BvhError::BvhError(Kind kind, int line, const std::string& what)
    : Error("bvh line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

namespace {

struct Token {
  std::string_view text;
  int line;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  int line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\r' &&
             text[i] != '\n') {
        ++i;
      }
      tokens.push_back({text.substr(start, i - start), line});
    }
  }
  return tokens;
}

enum class Channel { kXpos, kYpos, kZpos, kXrot, kYrot, kZrot };

struct JointDef {
  std::string name;
  int parent = -1;
  Vec3 offset;
  std::vector<Channel> channels;
  int channel_offset = 0;
};

// Frame conversion applied to a Y-up file: +90 deg about X maps +Y to +Z.
const Quat kYUpToZUp = Quat::from_axis_angle(Vec3::unit_x(), std::numbers::pi / 2);

class Parser {
 public:
  Parser(std::vector<Token> tokens, const BvhOptions& opts)
      : toks_(std::move(tokens)), opts_(opts) {}

  BvhMotion run() {
    if (at_end() || peek().text != "HIERARCHY") {
      throw BvhError(BvhError::Kind::kMissingSection, line(), "missing HIERARCHY section");
    }
    ++pos_;
    if (at_end() || peek().text != "ROOT") {
      throw BvhError(BvhError::Kind::kMalformedHeader, line(), "expected ROOT");
    }
    ++pos_;
    parse_joint(-1);
    if (at_end() || peek().text != "MOTION") {
      throw BvhError(BvhError::Kind::kMissingSection, line(), "missing MOTION section");
    }
    ++pos_;
    return parse_motion();
  }

 private:
  bool at_end() const { return pos_ >= toks_.size(); }
  const Token& peek() const { return toks_[pos_]; }
  int line() const {
    if (toks_.empty()) return 1;
    return at_end() ? toks_.back().line : toks_[pos_].line;
  }

  const Token& next(const char* expected_what) {
    if (at_end()) {
      throw BvhError(BvhError::Kind::kMalformedHeader, line(),
                     std::string("unexpected end of file, expected ") + expected_what);
    }
    return toks_[pos_++];
  }

  void expect(std::string_view word) {
    const Token& t = next(std::string(word).c_str());
    if (t.text != word) {
      throw BvhError(BvhError::Kind::kMalformedHeader, t.line,
                     "expected '" + std::string(word) + "', found '" + std::string(t.text) + "'");
    }
  }

  double number(BvhError::Kind kind_on_error = BvhError::Kind::kMalformedHeader) {
    const Token& t = next("a number");
    double v = 0.0;
    const auto* b = t.text.data();
    const auto* e = b + t.text.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      // from_chars rejects "nan"/"inf" spellings inconsistently; treat any
      // non-numeric token as malformed, any non-finite number as kNonFinite.
      std::string s(t.text);
      char* endp = nullptr;
      v = std::strtod(s.c_str(), &endp);
      if (endp != s.c_str() + s.size()) {
        throw BvhError(kind_on_error, t.line, "invalid number '" + s + "'");
      }
    }
    if (!std::isfinite(v)) {
      throw BvhError(BvhError::Kind::kNonFinite, t.line, "non-finite value");
    }
    return v;
  }

  void parse_joint(int parent) {
    JointDef def;
    def.name = std::string(next("joint name").text);
    def.parent = parent;
    expect("{");
    expect("OFFSET");
    def.offset = {number(), number(), number()};
    const int channels_line = line();
    expect("CHANNELS");
    const double n = number();
    if (n < 0 || n > 6 || n != std::floor(n)) {
      throw BvhError(BvhError::Kind::kMalformedHeader, channels_line, "bad channel count");
    }
    std::string rot_order;
    for (int i = 0; i < static_cast<int>(n); ++i) {
      const Token& t = next("channel name");
      if (t.text == "Xposition") def.channels.push_back(Channel::kXpos);
      else if (t.text == "Yposition") def.channels.push_back(Channel::kYpos);
      else if (t.text == "Zposition") def.channels.push_back(Channel::kZpos);
      else if (t.text == "Xrotation") { def.channels.push_back(Channel::kXrot); rot_order += 'X'; }
      else if (t.text == "Yrotation") { def.channels.push_back(Channel::kYrot); rot_order += 'Y'; }
      else if (t.text == "Zrotation") { def.channels.push_back(Channel::kZrot); rot_order += 'Z'; }
      else {
        throw BvhError(BvhError::Kind::kMalformedHeader, t.line,
                       "unknown channel '" + std::string(t.text) + "'");
      }
    }
    if (!rot_order.empty() && rot_order != "ZYX" && rot_order != "ZXY" && rot_order != "XYZ") {
      throw BvhError(BvhError::Kind::kUnsupportedChannelOrder, channels_line,
                     "unsupported rotation order " + rot_order + " for joint " + def.name);
    }
    def.channel_offset = total_channels_;
    total_channels_ += static_cast<int>(def.channels.size());
    const int self = static_cast<int>(joints_.size());
    joints_.push_back(std::move(def));

    while (true) {
      const Token& t = next("JOINT, End Site or }");
      if (t.text == "}") return;
      if (t.text == "JOINT") {
        parse_joint(self);
      } else if (t.text == "End") {
        expect("Site");
        expect("{");
        expect("OFFSET");
        number();
        number();
        number();
        expect("}");
      } else {
        throw BvhError(BvhError::Kind::kMalformedHeader, t.line,
                       "unexpected token '" + std::string(t.text) + "'");
      }
    }
  }

  BvhMotion parse_motion() {
    expect("Frames:");
    const double frames = number();
    if (frames < 1 || frames != std::floor(frames)) {
      throw BvhError(BvhError::Kind::kMalformedHeader, line(), "bad frame count");
    }
    expect("Frame");
    expect("Time:");
    const double frame_time = number();
    if (!(frame_time > 0.0)) {
      throw BvhError(BvhError::Kind::kMalformedHeader, line(), "frame time must be positive");
    }

    const std::size_t J = joints_.size();
    std::vector<std::string> names;
    std::vector<int> parents;
    std::vector<double> lengths;
    std::vector<Vec3> offsets;
    for (const JointDef& j : joints_) {
      names.push_back(j.name);
      parents.push_back(j.parent);
      const Vec3 o = convert(j.offset * opts_.scale);
      offsets.push_back(o);
      lengths.push_back(j.parent < 0 ? 0.0 : o.norm());
    }

    BvhMotion out{geom::Skeleton(names, parents, lengths, offsets), {}};
    out.sequence.fps = 1.0 / frame_time;
    std::vector<double> values(static_cast<std::size_t>(total_channels_));
    for (int f = 0; f < static_cast<int>(frames); ++f) {
      if (at_end()) {
        throw BvhError(BvhError::Kind::kChannelCountMismatch, line(),
                       "expected " + std::to_string(static_cast<int>(frames)) +
                           " frames, found " + std::to_string(f));
      }
      const int row_line = peek().line;
      std::size_t count = 0;
      while (!at_end() && peek().line == row_line) {
        if (count >= values.size()) {
          throw BvhError(BvhError::Kind::kChannelCountMismatch, row_line,
                         "frame has more than " + std::to_string(total_channels_) + " values");
        }
        values[count++] = number(BvhError::Kind::kChannelCountMismatch);
      }
      if (count != values.size()) {
        throw BvhError(BvhError::Kind::kChannelCountMismatch, row_line,
                       "frame has " + std::to_string(count) + " values, expected " +
                           std::to_string(total_channels_));
      }
      out.sequence.frames.push_back(pose_from_channels(values, J));
    }
    if (!at_end()) {
      throw BvhError(BvhError::Kind::kChannelCountMismatch, line(),
                     "trailing data after declared frames");
    }
    return out;
  }

  Vec3 convert(const Vec3& v) const {
    return opts_.up_axis == BvhOptions::UpAxis::kY ? kYUpToZUp.rotate(v) : v;
  }
  Quat convert(const Quat& q) const {
    return opts_.up_axis == BvhOptions::UpAxis::kY ? kYUpToZUp * q * kYUpToZUp.conjugate() : q;
  }

  geom::Pose pose_from_channels(const std::vector<double>& values, std::size_t J) const {
    // Composition happens in file coordinates; the up-axis conversion is a
    // similarity transform applied to the global results.
    std::vector<Vec3> pos(J);
    std::vector<Quat> rot(J);
    for (std::size_t j = 0; j < J; ++j) {
      const JointDef& def = joints_[j];
      Vec3 local = def.offset * opts_.scale;
      Vec3 translation = local;
      bool has_translation = false;
      Quat local_rot = Quat::identity();
      for (std::size_t c = 0; c < def.channels.size(); ++c) {
        const double v = values[static_cast<std::size_t>(def.channel_offset) + c];
        const double rad = v * std::numbers::pi / 180.0;
        switch (def.channels[c]) {
          case Channel::kXpos:
            if (!has_translation) translation = {};
            has_translation = true;
            translation.x = v * opts_.scale;
            break;
          case Channel::kYpos:
            if (!has_translation) translation = {};
            has_translation = true;
            translation.y = v * opts_.scale;
            break;
          case Channel::kZpos:
            if (!has_translation) translation = {};
            has_translation = true;
            translation.z = v * opts_.scale;
            break;
          case Channel::kXrot:
            local_rot = local_rot * Quat::from_axis_angle(Vec3::unit_x(), rad);
            break;
          case Channel::kYrot:
            local_rot = local_rot * Quat::from_axis_angle(Vec3::unit_y(), rad);
            break;
          case Channel::kZrot:
            local_rot = local_rot * Quat::from_axis_angle(Vec3::unit_z(), rad);
            break;
        }
      }
      if (def.parent < 0) {
        pos[j] = translation;
        rot[j] = local_rot;
      } else {
        const auto p = static_cast<std::size_t>(def.parent);
        pos[j] = pos[p] + rot[p].rotate(translation);
        rot[j] = rot[p] * local_rot;
      }
    }
    geom::Pose pose(J);
    for (std::size_t j = 0; j < J; ++j) {
      pose.positions[j] = convert(pos[j]);
      pose.rotations[j] = convert(rot[j]).normalized().canonical();
    }
    return pose;
  }

  std::vector<Token> toks_;
  BvhOptions opts_;
  std::size_t pos_ = 0;
  std::vector<JointDef> joints_;
  int total_channels_ = 0;
};

// Z-Y-X Euler angles (degrees) with q = Rz(a) Ry(b) Rx(c).
Vec3 euler_zyx_degrees(const Quat& q) {
  const double m00 = 1 - 2 * (q.y * q.y + q.z * q.z);
  const double m10 = 2 * (q.x * q.y + q.w * q.z);
  const double m20 = 2 * (q.x * q.z - q.w * q.y);
  const double m21 = 2 * (q.y * q.z + q.w * q.x);
  const double m22 = 1 - 2 * (q.x * q.x + q.y * q.y);
  const double b = std::asin(std::clamp(-m20, -1.0, 1.0));
  const double a = std::atan2(m10, m00);
  const double c = std::atan2(m21, m22);
  const double k = 180.0 / std::numbers::pi;
  return {a * k, b * k, c * k};
}

}  // namespace

BvhMotion parse_bvh(std::string_view text, const BvhOptions& opts) {
  return Parser(tokenize(text), opts).run();
}

std::string write_bvh(const geom::Skeleton& skeleton, const geom::MotionSequence& seq,
                      const BvhOptions& opts) {
  const std::size_t J = skeleton.joint_count();
  if (skeleton.rest_offsets().size() != J) {
    throw InvalidArgument("writing BVH requires skeleton rest offsets");
  }
  const bool y_up = opts.up_axis == BvhOptions::UpAxis::kY;
  const Quat to_file = y_up ? kYUpToZUp.conjugate() : Quat::identity();
  auto file_vec = [&](const Vec3& v) { return to_file.rotate(v) / opts.scale; };
  auto file_rot = [&](const Quat& q) { return to_file * q * to_file.conjugate(); };

  std::vector<std::vector<int>> children(J);
  for (std::size_t j = 0; j < J; ++j) {
    const int p = skeleton.parents()[j];
    if (p >= 0) children[static_cast<std::size_t>(p)].push_back(static_cast<int>(j));
  }

  std::ostringstream os;
  os << std::setprecision(9);
  // Joints are emitted depth-first; channel data must follow the same order.
  std::vector<int> emit_order;
  auto write_joint = [&](auto&& self, int j, int depth) -> void {
    const auto ju = static_cast<std::size_t>(j);
    const std::string ind(static_cast<std::size_t>(depth) * 2, ' ');
    const bool is_root = skeleton.parents()[ju] < 0;
    emit_order.push_back(j);
    os << ind << (is_root ? "ROOT " : "JOINT ") << skeleton.joint_names()[ju] << "\n"
       << ind << "{\n";
    const Vec3 o = file_vec(skeleton.rest_offsets()[ju]);
    os << ind << "  OFFSET " << o.x << " " << o.y << " " << o.z << "\n";
    if (is_root) {
      os << ind << "  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation\n";
    } else {
      os << ind << "  CHANNELS 3 Zrotation Yrotation Xrotation\n";
    }
    if (children[ju].empty()) {
      os << ind << "  End Site\n" << ind << "  {\n" << ind << "    OFFSET 0 0 0\n" << ind
         << "  }\n";
    }
    for (int c : children[ju]) self(self, c, depth + 1);
    os << ind << "}\n";
  };
  os << "HIERARCHY\n";
  write_joint(write_joint, skeleton.root(), 0);
  os << "MOTION\nFrames: " << seq.length() << "\nFrame Time: " << (1.0 / seq.fps) << "\n";

  for (const geom::Pose& pose : seq.frames) {
    bool first = true;
    auto put = [&](double v) {
      if (!first) os << ' ';
      os << v;
      first = false;
    };
    for (int j : emit_order) {
      const auto ju = static_cast<std::size_t>(j);
      const int p = skeleton.parents()[ju];
      const Quat global = file_rot(pose.rotations[ju]);
      Quat local = global;
      if (p < 0) {
        const Vec3 r = file_vec(pose.positions[ju]);
        put(r.x);
        put(r.y);
        put(r.z);
      } else {
        local = file_rot(pose.rotations[static_cast<std::size_t>(p)]).conjugate() * global;
      }
      const Vec3 e = euler_zyx_degrees(local.normalized());
      put(e.x);
      put(e.y);
      put(e.z);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace cmib::data
