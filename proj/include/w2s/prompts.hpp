// Copyright 2026 The W2S Label Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Four-round annotation conversation: an introduction followed by three
// rounds that each return a JSON object.
//
//   intro  workflow description, no image
//   r1     instance crop + category/size priors  -> caption, Category, Size,
//          optional Color/Geometry (<= 20 words)
//   r2     highlighted foreground crop + r1 caption -> caption,
//          relative_location (<= 40 words)
//   r3     grid label + r2 caption -> caption, absolute_location (<= 60 words)

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "w2s/error.hpp"
#include "w2s/vlm_client.hpp"

namespace w2s {

enum class Round { intro, r1, r2, r3 };

inline const char* to_string(Round r) {
  switch (r) {
    case Round::intro: return "intro";
    case Round::r1: return "r1";
    case Round::r2: return "r2";
    case Round::r3: return "r3";
  }
  return "?";
}

/// Rule-computed attributes handed to the model as fixed facts.
struct Priors {
  std::string category;
  std::string size;
  std::string grid_label;

  friend bool operator==(const Priors&, const Priors&) = default;
};

struct ConversationState {
  std::string instance_id;
  Round round = Round::intro;
  std::vector<Message> messages;
  Priors priors;
  std::optional<Bytes> instance_crop;    // PNG, round 1
  std::optional<Bytes> foreground_crop;  // PNG with the target highlighted, round 2
  // Accumulated outputs.
  std::string self_caption;
  std::string relative_caption;
  std::string absolute_caption;
  std::optional<std::string> color;
  std::optional<std::string> geometry;
  std::string relative_location;
};

struct RoundSchema {
  Round round;
  std::vector<std::string> required;
  std::vector<std::string> optional;
  int word_limit = 0;
};

inline const RoundSchema& schema_for(Round r) {
  static const std::array<RoundSchema, 4> schemas{{
      {Round::intro, {}, {}, 0},
      {Round::r1, {"caption", "Category", "Size"}, {"Color", "Geometry"}, 20},
      {Round::r2, {"caption", "relative_location"}, {}, 40},
      {Round::r3, {"caption", "absolute_location"}, {}, 60},
  }};
  return schemas[static_cast<int>(r)];
}

namespace prompt_text {

inline constexpr std::string_view kIntro =
    "Hello InterVL,\n"
    "\n"
    "I need your assistance in annotating aerial images. We will proceed in three steps:\n"
    "\n"
    "1. Initial Captioning: I will provide an image of an aerial target. Please generate a caption describing "
    "its attributes including {gt_size} and {gt_category}.\n"
    "2. Caption Refinement with Context: Next, I'll provide an image showing the target within its surroundings. "
    "Please refine the caption by adding information about the target's relative location within its "
    "environment.\n"
    "3. Caption Enhancement with Absolute Location: Finally, I'll provide the region of the image where the "
    "target is located (for example: top, left of the image). Based on this information and the caption from "
    "Step 2, please incorporate the absolute location attribute.\n"
    "\n"
    "Important: The red box in the provided images is only for your reference to identify the target. Do not "
    "mention the red box or any red-box-related information in the final caption.";

inline constexpr std::string_view kRound1 =
    "You are provided with an aerial image of a target. The red box highlights the target.\n"
    "- Generate a caption describing the target.\n"
    "- Must using the provided Category: \"{gt_category}\" and Size: \"{gt_size}\" in caption.\n"
    "- Include Color and Geometry only if you are certain about them.\n"
    "- Do not mention the red box or any red box-related information in final caption.\n"
    "- Keep the caption under 20 words.\n"
    "- Only include information you can confidently determine from the image. Avoid speculative or aesthetic "
    "descriptions.\n"
    "\n"
    "Must format your answer as a JSON object with the following structure and strictly adhere to the JSON "
    "format:\n"
    "{caption1_template}";

inline constexpr std::string_view kRound2 =
    "You are provided with an instance's foreground region image showing its surrounding environment. The red "
    "box highlights the target (for your reference, do not mention it).\n"
    "\n"
    "- Based on the caption from Step 1: \"{self_caption}\", refine the description by incorporating relative "
    "location information about the target with respect to its surrounding environment or nearby objects.\n"
    "- Maintain the original attributes (Category, Size, Color, Geometry).\n"
    "- Do not mention the red box or any red box-related information in final caption.\n"
    "- Do not describe the target's location relative to the image boundaries (e.g., 'top left of the image').\n"
    "- Keep the caption under 40 words.\n"
    "- Only include information you can confidently determine from the image. Avoid speculative or aesthetic "
    "descriptions.\n"
    "Must format your answer as a JSON object with the following structure and strictly adhere to the JSON "
    "format:\n"
    "{caption2_template}";

inline constexpr std::string_view kRound3 =
    "You are provided the instance's absolute position in the image.\n"
    "\n"
    "Absolute Location: \"{box_pos}\".\n"
    "- Review the caption from Step 2: \"{relative_caption}\", enhance the caption by incorporating the "
    "provided absolute location information.\n"
    "- Keep the caption under 60 words.\n"
    "- Only include information you can confidently determine from the image. Avoid speculative or aesthetic "
    "descriptions.\n"
    "Must format your answer as a JSON object with the following structure and strictly adhere to the JSON "
    "format:\n"
    "{caption3_template}";

}  // namespace prompt_text

namespace detail {

inline std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

inline void replace_all(std::string& text, std::string_view key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
}

inline const std::string& require(const std::string& value, const char* name) {
  if (value.empty()) throw InvalidArgument(std::string("prompt placeholder '") + name + "' has no value");
  return value;
}

}  // namespace detail

inline std::string caption1_template(const Priors& p) {
  return "{\n"
         "    \"caption\": \"[A brief sentence describing the target using the provided Category and Size. "
         "Include **Color** and **Geometry** only if you are certain about them.]\",\n"
         "    \"Category\": " + detail::quoted(p.category) + ",\n"
         "    \"Size\": " + detail::quoted(p.size) + ",\n"
         "    \"Color\": \"[Include if certain]\",\n"
         "    \"Geometry\": \"[Include if certain]\"\n"
         "}";
}

inline std::string caption2_template() {
  return "{\n"
         "    \"caption\": \"[Refined caption including the target's relative location attribute.]\",\n"
         "    \"relative_location\": \"[The target's relative location within its surroundings.]\"\n"
         "}";
}

inline std::string caption3_template(const Priors& p) {
  return "{\n"
         "    \"caption\": \"[The caption by incorporating the absolute location.]\",\n"
         "    \"absolute_location\": " + detail::quoted(p.grid_label) + "\n"
         "}";
}

/// The user message opening `round`. Pure function of the state.
inline Message round_message(Round round, const ConversationState& s) {
  using detail::replace_all;
  using detail::require;
  Message m;
  m.role = Role::user;
  switch (round) {
    case Round::intro: {
      m.text = prompt_text::kIntro;
      replace_all(m.text, "{gt_size}", require(s.priors.size, "gt_size"));
      replace_all(m.text, "{gt_category}", require(s.priors.category, "gt_category"));
      break;
    }
    case Round::r1: {
      if (!s.instance_crop) throw InvalidArgument("round r1 needs the instance crop");
      m.text = prompt_text::kRound1;
      replace_all(m.text, "{caption1_template}", caption1_template(s.priors));
      replace_all(m.text, "{gt_category}", require(s.priors.category, "gt_category"));
      replace_all(m.text, "{gt_size}", require(s.priors.size, "gt_size"));
      m.image_png = s.instance_crop;
      break;
    }
    case Round::r2: {
      if (!s.foreground_crop) throw InvalidArgument("round r2 needs the highlighted foreground crop");
      m.text = prompt_text::kRound2;
      replace_all(m.text, "{caption2_template}", caption2_template());
      replace_all(m.text, "{self_caption}", require(s.self_caption, "self_caption"));
      m.image_png = s.foreground_crop;
      break;
    }
    case Round::r3: {
      m.text = prompt_text::kRound3;
      replace_all(m.text, "{caption3_template}", caption3_template(s.priors));
      replace_all(m.text, "{box_pos}", require(s.priors.grid_label, "box_pos"));
      replace_all(m.text, "{relative_caption}", require(s.relative_caption, "relative_caption"));
      break;
    }
  }
  return m;
}

/// Full message list to send for `round`: the conversation so far plus the
/// round's opening message.
inline std::vector<Message> build_prompt(Round round, const ConversationState& s) {
  if (round != s.round)
    throw InvalidArgument(std::string("conversation is at round ") + to_string(s.round) + ", not " + to_string(round));
  std::vector<Message> out = s.messages;
  out.push_back(round_message(round, s));
  return out;
}

}  // namespace w2s
