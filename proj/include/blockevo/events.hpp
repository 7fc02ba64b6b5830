#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace blockevo {

// One terminal of the test grammar: a user input sent to the VM before a
// step. Wait is the only kind with a duration; all others take one step.
struct EventDescriptor {
    enum class Kind {
        KeyPress,    // handler-driven; key held for exactly one step
        KeyDown,     // sensing-driven; toggles persistent key state
        ClickSprite, // sprite or clone id
        ClickStage,
        TypeText,
        MouseDown,   // toggles mouse button state
        MouseMove,
        Sound,
        Wait,
    };

    Kind kind = Kind::Wait;
    std::string key;        // KeyPress / KeyDown
    std::string target;     // ClickSprite: sprite or clone id
    std::string text;       // TypeText
    double x = 0, y = 0;    // MouseMove
    double volume = 0;      // Sound
    double durationMs = 0;  // Wait

    bool operator==(const EventDescriptor&) const = default;

    std::string describe() const {
        switch (kind) {
            case Kind::KeyPress: return "KeyPress " + key;
            case Kind::KeyDown: return "KeyDown " + key;
            case Kind::ClickSprite: return "ClickSprite " + target;
            case Kind::ClickStage: return "ClickStage";
            case Kind::TypeText: return "TypeText " + text;
            case Kind::MouseDown: return "MouseDown";
            case Kind::MouseMove: return "MouseMove " + std::to_string(x) + "," + std::to_string(y);
            case Kind::Sound: return "Sound " + std::to_string(volume);
            case Kind::Wait: return "Wait " + std::to_string(durationMs) + "ms";
        }
        return "?";
    }

    nlohmann::json toJson() const {
        nlohmann::json j;
        switch (kind) {
            case Kind::KeyPress: j["kind"] = "KeyPress"; j["key"] = key; break;
            case Kind::KeyDown: j["kind"] = "KeyDown"; j["key"] = key; break;
            case Kind::ClickSprite: j["kind"] = "ClickSprite"; j["target"] = target; break;
            case Kind::ClickStage: j["kind"] = "ClickStage"; break;
            case Kind::TypeText: j["kind"] = "TypeText"; j["text"] = text; break;
            case Kind::MouseDown: j["kind"] = "MouseDown"; break;
            case Kind::MouseMove: j["kind"] = "MouseMove"; j["x"] = x; j["y"] = y; break;
            case Kind::Sound: j["kind"] = "Sound"; j["volume"] = volume; break;
            case Kind::Wait: j["kind"] = "Wait"; j["durationMs"] = durationMs; break;
        }
        return j;
    }

    static EventDescriptor fromJson(const nlohmann::json& j) {
        EventDescriptor e;
        std::string k = j.value("kind", std::string());
        if (k == "KeyPress") { e.kind = Kind::KeyPress; e.key = j.value("key", std::string()); }
        else if (k == "KeyDown") { e.kind = Kind::KeyDown; e.key = j.value("key", std::string()); }
        else if (k == "ClickSprite") { e.kind = Kind::ClickSprite; e.target = j.value("target", std::string()); }
        else if (k == "ClickStage") e.kind = Kind::ClickStage;
        else if (k == "TypeText") { e.kind = Kind::TypeText; e.text = j.value("text", std::string()); }
        else if (k == "MouseDown") e.kind = Kind::MouseDown;
        else if (k == "MouseMove") { e.kind = Kind::MouseMove; e.x = j.value("x", 0.0); e.y = j.value("y", 0.0); }
        else if (k == "Sound") { e.kind = Kind::Sound; e.volume = j.value("volume", 0.0); }
        else if (k == "Wait") { e.kind = Kind::Wait; e.durationMs = j.value("durationMs", 0.0); }
        else throw std::runtime_error("unknown event kind '" + k + "'");
        return e;
    }
};

using EventList = std::vector<EventDescriptor>;

} // namespace blockevo
