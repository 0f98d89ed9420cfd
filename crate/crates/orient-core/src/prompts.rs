//! Fixed baseline prompt protocols.
//!
//! Four protocols wrap a serialized multimodal input: zero-shot (B1),
//! few-shot without reasoning (B2), few-shot with three-step reasoning (B3),
//! and a bare chat turn for fine-tuned direct classification (B4). The
//! few-shot exemplars are frozen; only the `{input}` slot varies.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineProtocol {
    B1,
    B2,
    B3,
    B4,
}

impl BaselineProtocol {
    pub const ALL: [BaselineProtocol; 4] = [
        BaselineProtocol::B1,
        BaselineProtocol::B2,
        BaselineProtocol::B3,
        BaselineProtocol::B4,
    ];
}

impl fmt::Display for BaselineProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            BaselineProtocol::B1 => "b1",
            BaselineProtocol::B2 => "b2",
            BaselineProtocol::B3 => "b3",
            BaselineProtocol::B4 => "b4",
        };
        f.write_str(token)
    }
}

impl std::str::FromStr for BaselineProtocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "b1" => Ok(BaselineProtocol::B1),
            "b2" => Ok(BaselineProtocol::B2),
            "b3" => Ok(BaselineProtocol::B3),
            "b4" => Ok(BaselineProtocol::B4),
            other => Err(format!("unknown baseline protocol {other:?}")),
        }
    }
}

const B1_EN: &str = "Question: {input}\nWhich direction is the user facing? Please answer North, South, East, or West.\nAnswer:";

const B2_EN: &str = "Instruction: Based on the audio description and coordinate information, determine which direction the user is facing.\n\nExample: Audio: I am at the gym, and the pharmacy is in front of me | Coordinates: gym(4,6), pharmacy(4,7)\nAnswer: North\n\nExample: Audio: I am at the park, and the water park is behind me | Coordinates: park(0,0), water_park(0,1)\nAnswer: South\n\nExample: Audio: I am at the foundation, and the high school is on my right | Coordinates: foundation(0,7), high_school(0,6)\nAnswer: East\n\nExample: Audio: I am at the cooperative store, and the theater is on my left | Coordinates: cooperative_store(8,8), theater(8,7)\nAnswer: West\n\nQuestion: {input}\nAnswer:";

const B3_EN: &str = "Instruction: Use three-step reasoning to determine the user's facing direction given the audio description and coordinates.\n\nExample 1\nInput: Audio: I am at the gym, and the pharmacy is in front of me | Coordinates: gym(4,6), pharmacy(4,7)\nOutput:\nStep 1: Extract spatial relations\n    Spatial relation = front\n    Reference landmark = pharmacy\nStep 2: Calculate absolute directions\n    Direction vector from gym to pharmacy: (4,7) - (4,6) = (0,1)\n    Direction = North\nStep 3: Infer user orientation\n    The pharmacy is to the North, and the user describes it as \"in front of me.\"\n    Spatial mapping rules indicate front = North when the user is facing North.\n    Therefore, the user is facing North.\n\nExample 2\nInput: Audio: I am at the park, and the water park is behind me | Coordinates: park(0,0), water_park(0,1)\nOutput:\nStep 1: Extract spatial relations\n    Spatial relation = behind\n    Reference landmark = water park\nStep 2: Calculate absolute directions\n    Direction vector from park to water park: (0,1) - (0,0) = (0,1)\n    Direction = North\nStep 3: Infer user orientation\n    The water park is to the North, and the user describes it as \"behind me.\"\n    Spatial mapping rules indicate behind = North when the user is facing South.\n    Therefore, the user is facing South.\n\nNow use the same three-step reasoning:\nInput: {input}\nOutput:";

const B4_EN: &str = "USER: {input}\nASSISTANT:";

const B1_ZH: &str = "問題：{input}\n使用者面向哪個方向？請回答北、南、東或西。\n答案：";

const B2_ZH: &str = "指示：根據語音描述與座標資訊，判斷使用者面向的方向。\n\n範例：Audio: 我在健身房，藥局在我前面 | Coordinates: gym(4,6), pharmacy(4,7)\n答案：北\n\n範例：Audio: 我在公園，水上樂園在我後面 | Coordinates: park(0,0), water_park(0,1)\n答案：南\n\n範例：Audio: 我在基金會，高中在我右邊 | Coordinates: foundation(0,7), high_school(0,6)\n答案：東\n\n範例：Audio: 我在合作社，劇院在我左邊 | Coordinates: cooperative_store(8,8), theater(8,7)\n答案：西\n\n問題：{input}\n答案：";

const B3_ZH: &str = "指示：請用三步驟推理，根據語音描述與座標判斷使用者面向的方向。\n\n範例一\n輸入：Audio: 我在健身房，藥局在我前面 | Coordinates: gym(4,6), pharmacy(4,7)\n輸出：\n步驟一：擷取空間關係\n    空間關係 = 前面\n    參考地標 = 藥局\n步驟二：計算絕對方向\n    方向向量: (4,7) - (4,6) = (0,1)\n    方向 = 北\n步驟三：推斷使用者朝向\n    藥局位於北方，使用者描述它「在我前面」。\n    空間對應規則顯示前面 = 北方，表示使用者面向北方。\n    因此，使用者面向北方。\n\n範例二\n輸入：Audio: 我在公園，水上樂園在我後面 | Coordinates: park(0,0), water_park(0,1)\n輸出：\n步驟一：擷取空間關係\n    空間關係 = 後面\n    參考地標 = 水上樂園\n步驟二：計算絕對方向\n    方向向量: (0,1) - (0,0) = (0,1)\n    方向 = 北\n步驟三：推斷使用者朝向\n    水上樂園位於北方，使用者描述它「在我後面」。\n    空間對應規則顯示後面 = 北方，表示使用者面向南方。\n    因此，使用者面向南方。\n\n現在用同樣的三步驟推理：\n輸入：{input}\n輸出：";

const B4_ZH: &str = "USER: {input}\nASSISTANT:";

/// The raw template for a protocol and language tag; non-Chinese tags fall
/// back to the English templates.
pub fn prompt_template(protocol: BaselineProtocol, language: &str) -> &'static str {
    let zh = language.starts_with("zh");
    match (protocol, zh) {
        (BaselineProtocol::B1, false) => B1_EN,
        (BaselineProtocol::B2, false) => B2_EN,
        (BaselineProtocol::B3, false) => B3_EN,
        (BaselineProtocol::B4, false) => B4_EN,
        (BaselineProtocol::B1, true) => B1_ZH,
        (BaselineProtocol::B2, true) => B2_ZH,
        (BaselineProtocol::B3, true) => B3_ZH,
        (BaselineProtocol::B4, true) => B4_ZH,
    }
}

/// Instantiate a protocol template with a serialized multimodal input.
pub fn render_prompt(protocol: BaselineProtocol, language: &str, input: &str) -> String {
    prompt_template(protocol, language).replace("{input}", input)
}
