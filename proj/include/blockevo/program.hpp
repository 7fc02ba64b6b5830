#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockevo/value.hpp"

namespace blockevo {

using Json = nlohmann::json;
using BlockId = int32_t;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Malformed JSON text.
struct SyntaxError : ParseError {
    using ParseError::ParseError;
};
// Structurally valid JSON that violates the program schema; message carries
// the offending path.
struct ValidationError : ParseError {
    using ParseError::ParseError;
};

// ---------------------------------------------------------------------------
// Opcodes
// ---------------------------------------------------------------------------

enum class Op {
    // control
    Wait, Forever, Repeat, If, IfElse, WaitUntil, StopAll,
    CreateCloneOf, DeleteThisClone, Broadcast, BroadcastAndWait, CallProcedure,
    // motion
    GoToXY, ChangeXBy, ChangeYBy, GlideSecsToXY, PointInDirection, IfOnEdgeBounce,
    // looks
    SayForSecs, Say, Show, Hide,
    // data
    SetVariable, ChangeVariableBy,
    // sensing (expressions)
    TouchingSprite, TouchingEdge, KeyDown, MouseDown, MouseX, MouseY,
    DistanceTo, Answer, AskAndWait, Loudness, PositionX, PositionY,
    // operators (expressions)
    Add, Sub, Mul, Div, Lt, Gt, Eq, And, Or, Not, Literal, VariableRef, PickRandom,
};

inline const std::map<std::string, Op>& opcodeTable() {
    static const std::map<std::string, Op> table = {
        {"wait", Op::Wait}, {"forever", Op::Forever}, {"repeat", Op::Repeat},
        {"if", Op::If}, {"ifElse", Op::IfElse}, {"waitUntil", Op::WaitUntil},
        {"stopAll", Op::StopAll}, {"createCloneOf", Op::CreateCloneOf},
        {"deleteThisClone", Op::DeleteThisClone}, {"broadcast", Op::Broadcast},
        {"broadcastAndWait", Op::BroadcastAndWait}, {"callProcedure", Op::CallProcedure},
        {"goToXY", Op::GoToXY}, {"changeXBy", Op::ChangeXBy}, {"changeYBy", Op::ChangeYBy},
        {"glideSecsToXY", Op::GlideSecsToXY}, {"pointInDirection", Op::PointInDirection},
        {"ifOnEdgeBounce", Op::IfOnEdgeBounce},
        {"sayForSecs", Op::SayForSecs}, {"say", Op::Say}, {"show", Op::Show}, {"hide", Op::Hide},
        {"setVariable", Op::SetVariable}, {"changeVariableBy", Op::ChangeVariableBy},
        {"touchingSprite", Op::TouchingSprite}, {"touchingEdge", Op::TouchingEdge},
        {"keyDown", Op::KeyDown}, {"mouseDown", Op::MouseDown},
        {"mouseX", Op::MouseX}, {"mouseY", Op::MouseY},
        {"distanceTo", Op::DistanceTo}, {"answer", Op::Answer},
        {"askAndWait", Op::AskAndWait}, {"loudness", Op::Loudness},
        {"positionX", Op::PositionX}, {"positionY", Op::PositionY},
        {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"/", Op::Div},
        {"<", Op::Lt}, {">", Op::Gt}, {"=", Op::Eq},
        {"and", Op::And}, {"or", Op::Or}, {"not", Op::Not},
        {"literal", Op::Literal}, {"variableRef", Op::VariableRef},
        {"pickRandom", Op::PickRandom},
    };
    return table;
}

inline std::string opcodeName(Op op) {
    for (const auto& [name, o] : opcodeTable())
        if (o == op) return name;
    return "?";
}

inline bool isExpressionOp(Op op) {
    switch (op) {
        case Op::TouchingSprite: case Op::TouchingEdge: case Op::KeyDown:
        case Op::MouseDown: case Op::MouseX: case Op::MouseY: case Op::DistanceTo:
        case Op::Answer: case Op::Loudness: case Op::PositionX: case Op::PositionY:
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        case Op::Lt: case Op::Gt: case Op::Eq: case Op::And: case Op::Or: case Op::Not:
        case Op::Literal: case Op::VariableRef: case Op::PickRandom:
            return true;
        default:
            return false;
    }
}

inline bool isBooleanOp(Op op) {
    switch (op) {
        case Op::TouchingSprite: case Op::TouchingEdge: case Op::KeyDown:
        case Op::MouseDown: case Op::Lt: case Op::Gt: case Op::Eq:
        case Op::And: case Op::Or: case Op::Not:
            return true;
        default:
            return false;
    }
}

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

// Expression operand tree. Expressions are blocks in the JSON format but
// carry no ids: they are not statements, so they are neither CFG nodes nor
// coverage targets.
struct Expr {
    Op op = Op::Literal;
    Value literal;                       // Literal
    std::string name;                    // VariableRef / sensing targets / key names
    std::vector<Expr> operands;          // ordered operator children
};

struct Block {
    BlockId id = -1;
    Op op = Op::Wait;
    std::map<std::string, Expr> args;    // opcode-specific expression operands
    std::string strArg;                  // message / variable / sprite / procedure name
    std::vector<std::vector<Block>> children; // 0-2 nested lists
};

enum class HatKind {
    GreenFlag, KeyPressed, SpriteClicked, StageClicked,
    ReceiveMessage, StartAsClone, LoudnessGreater,
};

struct Hat {
    BlockId id = -1;
    HatKind kind = HatKind::GreenFlag;
    std::string key;       // KeyPressed
    std::string message;   // ReceiveMessage
    double threshold = 0;  // LoudnessGreater
};

struct Script {
    Hat hat;
    std::vector<Block> body;
};

struct SpriteDef {
    std::string name;
    double x = 0, y = 0;
    double width = 0, height = 0;
    bool visible = true;
    std::vector<Script> scripts;
    std::vector<std::pair<std::string, std::vector<Block>>> procedures; // doc order
};

struct Program {
    SpriteDef stage;
    std::vector<SpriteDef> sprites;
    std::vector<std::pair<std::string, Value>> variables; // doc order
    double stageWidth = 480;
    double stageHeight = 360;

    // Derived, filled in by parse/finalize.
    int scriptCount = 0;
    int blockCount = 0;               // hats + statements (id-bearing blocks)
    std::vector<BlockId> allBlockIds; // document order

    const SpriteDef* findSprite(const std::string& name) const {
        if (stage.name == name) return &stage;
        for (const auto& s : sprites)
            if (s.name == name) return &s;
        return nullptr;
    }

    // Actors in document order: stage first, then sprites.
    std::vector<const SpriteDef*> actors() const {
        std::vector<const SpriteDef*> out;
        out.push_back(&stage);
        for (const auto& s : sprites) out.push_back(&s);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ValidationError(path + ": " + msg);
}

inline Expr parseExpr(const Json& j, const std::string& path);

inline Expr exprOperand(const Json& args, const char* key, const std::string& path,
                        bool required = true) {
    if (!args.contains(key)) {
        if (required) fail(path, std::string("missing arg '") + key + "'");
        return Expr{};
    }
    return parseExpr(args.at(key), path + "." + key);
}

inline Expr parseExpr(const Json& j, const std::string& path) {
    Expr e;
    // Bare numbers / strings / booleans are literal sugar.
    if (j.is_number()) { e.op = Op::Literal; e.literal = Value(j.get<double>()); return e; }
    if (j.is_string()) { e.op = Op::Literal; e.literal = Value(j.get<std::string>()); return e; }
    if (j.is_boolean()) { e.op = Op::Literal; e.literal = Value(j.get<bool>()); return e; }
    if (!j.is_object()) fail(path, "expression must be a number, string, bool or block object");

    std::string opname = j.value("op", std::string());
    auto it = opcodeTable().find(opname);
    if (it == opcodeTable().end()) fail(path, "unknown opcode '" + opname + "'");
    e.op = it->second;
    if (!isExpressionOp(e.op)) fail(path, "'" + opname + "' is a statement, not an expression");

    Json args = j.value("args", Json::object());
    switch (e.op) {
        case Op::Literal: {
            if (!args.contains("value")) fail(path, "literal needs args.value");
            const Json& v = args.at("value");
            if (v.is_number()) e.literal = Value(v.get<double>());
            else if (v.is_string()) e.literal = Value(v.get<std::string>());
            else if (v.is_boolean()) e.literal = Value(v.get<bool>());
            else fail(path, "literal value must be scalar");
            break;
        }
        case Op::VariableRef:
            if (!args.contains("variable")) fail(path, "variableRef needs args.variable");
            e.name = args.at("variable").get<std::string>();
            break;
        case Op::TouchingSprite:
        case Op::DistanceTo:
            if (!args.contains("target")) fail(path, "needs args.target");
            e.name = args.at("target").get<std::string>();
            break;
        case Op::KeyDown:
            if (!args.contains("key")) fail(path, "keyDown needs args.key");
            e.name = args.at("key").get<std::string>();
            break;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        case Op::Lt: case Op::Gt: case Op::Eq: case Op::And: case Op::Or:
            e.operands.push_back(exprOperand(args, "a", path));
            e.operands.push_back(exprOperand(args, "b", path));
            break;
        case Op::Not:
            e.operands.push_back(exprOperand(args, "a", path));
            break;
        case Op::PickRandom:
            e.operands.push_back(exprOperand(args, "from", path));
            e.operands.push_back(exprOperand(args, "to", path));
            break;
        default:
            break; // nullary sensing
    }
    return e;
}

struct IdAssigner {
    BlockId next = 0;
    std::set<BlockId> used;
    std::vector<BlockId>* order = nullptr;

    BlockId assign(std::optional<BlockId> explicitId, const std::string& path) {
        BlockId id;
        if (explicitId) {
            id = *explicitId;
        } else {
            while (used.count(next)) ++next;
            id = next;
        }
        if (used.count(id)) fail(path, "duplicate block id " + std::to_string(id));
        used.insert(id);
        if (order) order->push_back(id);
        return id;
    }
};

inline std::vector<Block> parseBlockList(const Json& j, const std::string& path, IdAssigner& ids);

inline Block parseBlock(const Json& j, const std::string& path, IdAssigner& ids) {
    if (!j.is_object()) fail(path, "block must be an object");
    Block b;
    std::string opname = j.value("op", std::string());
    auto it = opcodeTable().find(opname);
    if (it == opcodeTable().end()) fail(path, "unknown opcode '" + opname + "'");
    b.op = it->second;
    if (isExpressionOp(b.op) && b.op != Op::AskAndWait)
        fail(path, "'" + opname + "' is an expression, not a statement");

    std::optional<BlockId> explicitId;
    if (j.contains("id")) explicitId = j.at("id").get<BlockId>();
    b.id = ids.assign(explicitId, path);

    Json args = j.value("args", Json::object());
    auto needStr = [&](const char* key) {
        if (!args.contains(key)) fail(path, std::string("missing arg '") + key + "'");
        return args.at(key).get<std::string>();
    };

    switch (b.op) {
        case Op::Wait:
            b.args["seconds"] = exprOperand(args, "seconds", path); break;
        case Op::Repeat:
            b.args["times"] = exprOperand(args, "times", path); break;
        case Op::If: case Op::IfElse: case Op::WaitUntil:
            b.args["condition"] = exprOperand(args, "condition", path); break;
        case Op::CreateCloneOf:
            b.strArg = needStr("target"); break;
        case Op::Broadcast: case Op::BroadcastAndWait:
            b.strArg = needStr("message"); break;
        case Op::CallProcedure:
            b.strArg = needStr("name"); break;
        case Op::GoToXY:
            b.args["x"] = exprOperand(args, "x", path);
            b.args["y"] = exprOperand(args, "y", path);
            break;
        case Op::ChangeXBy:
            b.args["dx"] = exprOperand(args, "dx", path); break;
        case Op::ChangeYBy:
            b.args["dy"] = exprOperand(args, "dy", path); break;
        case Op::GlideSecsToXY:
            b.args["seconds"] = exprOperand(args, "seconds", path);
            b.args["x"] = exprOperand(args, "x", path);
            b.args["y"] = exprOperand(args, "y", path);
            break;
        case Op::PointInDirection:
            b.args["direction"] = exprOperand(args, "direction", path); break;
        case Op::SayForSecs:
            b.args["message"] = exprOperand(args, "message", path);
            b.args["seconds"] = exprOperand(args, "seconds", path);
            break;
        case Op::Say:
            b.args["message"] = exprOperand(args, "message", path); break;
        case Op::SetVariable: case Op::ChangeVariableBy:
            b.strArg = needStr("variable");
            b.args["value"] = exprOperand(args, "value", path);
            break;
        case Op::AskAndWait:
            b.args["prompt"] = exprOperand(args, "prompt", path); break;
        case Op::StopAll: case Op::DeleteThisClone: case Op::Forever:
        case Op::IfOnEdgeBounce: case Op::Show: case Op::Hide:
            break;
        default:
            fail(path, "opcode '" + opname + "' not valid as a statement");
    }

    Json children = j.value("children", Json::array());
    if (!children.is_array()) fail(path, "children must be an array of block lists");
    int expected = 0;
    if (b.op == Op::Forever || b.op == Op::Repeat || b.op == Op::If) expected = 1;
    if (b.op == Op::IfElse) expected = 2;
    if (static_cast<int>(children.size()) > (expected == 0 ? 0 : 2))
        fail(path, "too many child lists");
    if (expected > 0 && children.empty()) children = Json::array({Json::array()});
    if (b.op == Op::IfElse && children.size() < 2) children.push_back(Json::array());
    for (size_t i = 0; i < children.size(); ++i)
        b.children.push_back(parseBlockList(children[i], path + ".children[" + std::to_string(i) + "]", ids));
    return b;
}

inline std::vector<Block> parseBlockList(const Json& j, const std::string& path, IdAssigner& ids) {
    if (!j.is_array()) fail(path, "expected a block list");
    std::vector<Block> out;
    for (size_t i = 0; i < j.size(); ++i)
        out.push_back(parseBlock(j[i], path + "[" + std::to_string(i) + "]", ids));
    return out;
}

inline Hat parseHat(const Json& j, const std::string& path, IdAssigner& ids) {
    if (!j.is_object() || !j.contains("event")) fail(path, "hat needs an 'event' field");
    Hat h;
    std::optional<BlockId> explicitId;
    if (j.contains("id")) explicitId = j.at("id").get<BlockId>();
    h.id = ids.assign(explicitId, path);
    std::string ev = j.at("event").get<std::string>();
    if (ev == "greenFlag") h.kind = HatKind::GreenFlag;
    else if (ev == "keyPressed") { h.kind = HatKind::KeyPressed; h.key = j.value("key", std::string()); if (h.key.empty()) fail(path, "keyPressed needs 'key'"); }
    else if (ev == "spriteClicked") h.kind = HatKind::SpriteClicked;
    else if (ev == "stageClicked") h.kind = HatKind::StageClicked;
    else if (ev == "receiveMessage") { h.kind = HatKind::ReceiveMessage; h.message = j.value("message", std::string()); if (h.message.empty()) fail(path, "receiveMessage needs 'message'"); }
    else if (ev == "startAsClone") h.kind = HatKind::StartAsClone;
    else if (ev == "loudnessGreater") { h.kind = HatKind::LoudnessGreater; if (!j.contains("threshold")) fail(path, "loudnessGreater needs 'threshold'"); h.threshold = j.at("threshold").get<double>(); }
    else fail(path, "unknown hat event '" + ev + "'");
    return h;
}

inline SpriteDef parseSprite(const Json& j, const std::string& path, IdAssigner& ids,
                             bool isStage) {
    if (!j.is_object()) fail(path, "sprite must be an object");
    SpriteDef s;
    s.name = j.value("name", isStage ? std::string("Stage") : std::string());
    if (s.name.empty()) fail(path, "sprite needs a name");
    s.x = j.value("x", 0.0);
    s.y = j.value("y", 0.0);
    s.width = j.value("width", isStage ? 480.0 : 0.0);
    s.height = j.value("height", isStage ? 360.0 : 0.0);
    s.visible = j.value("visible", true);
    if (s.width < 0 || s.height < 0) fail(path, "sprite extent must be non-negative");

    for (size_t i = 0; i < j.value("scripts", Json::array()).size(); ++i) {
        const Json& sj = j.at("scripts")[i];
        std::string spath = path + ".scripts[" + std::to_string(i) + "]";
        Script sc;
        if (!sj.is_object() || !sj.contains("hat")) fail(spath, "script needs 'hat'");
        sc.hat = parseHat(sj.at("hat"), spath + ".hat", ids);
        sc.body = parseBlockList(sj.value("body", Json::array()), spath + ".body", ids);
        s.scripts.push_back(std::move(sc));
    }
    const Json procs = j.value("procedures", Json::object());
    if (!procs.is_object()) fail(path, "procedures must be an object");
    for (auto it = procs.begin(); it != procs.end(); ++it) {
        s.procedures.emplace_back(
            it.key(), parseBlockList(it.value(), path + ".procedures." + it.key(), ids));
    }
    return s;
}

// Walk every expression in a block (args, recursively).
template <typename F>
void forEachExpr(const Expr& e, F&& f) {
    f(e);
    for (const auto& c : e.operands) forEachExpr(c, f);
}

template <typename F>
void forEachBlock(const std::vector<Block>& blocks, F&& f) {
    for (const auto& b : blocks) {
        f(b);
        for (const auto& kids : b.children) forEachBlock(kids, f);
    }
}

inline void validateProgram(const Program& p) {
    std::set<std::string> names;
    for (const auto* a : p.actors()) {
        if (!names.insert(a->name).second)
            fail(a->name, "duplicate sprite name");
    }
    std::set<std::string> varNames;
    for (const auto& [name, init] : p.variables) {
        (void)init;
        if (!varNames.insert(name).second) fail("variables", "duplicate variable '" + name + "'");
    }
    if (p.stageWidth <= 0 || p.stageHeight <= 0)
        fail("stage", "stage dimensions must be positive");

    // program-wide broadcast receivers and sprite names
    std::set<std::string> messages;
    for (const auto* a : p.actors())
        for (const auto& sc : a->scripts)
            if (sc.hat.kind == HatKind::ReceiveMessage) messages.insert(sc.hat.message);

    for (const auto* a : p.actors()) {
        std::set<std::string> procNames;
        for (const auto& [pn, body] : a->procedures) { (void)body; procNames.insert(pn); }
        auto checkBlocks = [&](const std::vector<Block>& blocks) {
            forEachBlock(blocks, [&](const Block& b) {
                if (b.op == Op::CallProcedure && !procNames.count(b.strArg))
                    fail(a->name, "call to undefined procedure '" + b.strArg + "'");
                if (b.op == Op::CreateCloneOf && !p.findSprite(b.strArg))
                    fail(a->name, "createCloneOf unknown sprite '" + b.strArg + "'");
                if ((b.op == Op::Broadcast || b.op == Op::BroadcastAndWait) &&
                    !messages.count(b.strArg))
                    fail(a->name, "broadcast '" + b.strArg + "' has no receiver");
                for (const auto& [k, e] : b.args) {
                    (void)k;
                    forEachExpr(e, [&](const Expr& x) {
                        if ((x.op == Op::TouchingSprite || x.op == Op::DistanceTo) &&
                            !p.findSprite(x.name))
                            fail(a->name, opcodeName(x.op) + " of unknown sprite '" + x.name + "'");
                    });
                }
            });
        };
        for (const auto& sc : a->scripts) checkBlocks(sc.body);
        for (const auto& [pn, body] : a->procedures) { (void)pn; checkBlocks(body); }
    }
}

} // namespace detail

inline Program parseProgramJson(const Json& doc) {
    if (!doc.is_object()) detail::fail("$", "program document must be an object");
    Program p;
    detail::IdAssigner ids;
    ids.order = &p.allBlockIds;
    p.stageWidth = doc.value("stageWidth", 480.0);
    p.stageHeight = doc.value("stageHeight", 360.0);
    if (!doc.contains("stage")) detail::fail("$", "missing 'stage'");
    p.stage = detail::parseSprite(doc.at("stage"), "stage", ids, true);
    const Json sprites = doc.value("sprites", Json::array());
    if (!sprites.is_array()) detail::fail("sprites", "must be an array");
    for (size_t i = 0; i < sprites.size(); ++i)
        p.sprites.push_back(detail::parseSprite(sprites[i], "sprites[" + std::to_string(i) + "]", ids, false));
    const Json vars = doc.value("variables", Json::object());
    if (!vars.is_object()) detail::fail("variables", "must be an object");
    for (auto it = vars.begin(); it != vars.end(); ++it) {
        if (it.value().is_number()) p.variables.emplace_back(it.key(), Value(it.value().get<double>()));
        else if (it.value().is_string()) p.variables.emplace_back(it.key(), Value(it.value().get<std::string>()));
        else if (it.value().is_boolean()) p.variables.emplace_back(it.key(), Value(it.value().get<bool>()));
        else detail::fail("variables." + it.key(), "initial value must be scalar");
    }

    p.scriptCount = 0;
    p.blockCount = static_cast<int>(p.allBlockIds.size());
    for (const auto* a : p.actors()) p.scriptCount += static_cast<int>(a->scripts.size());
    detail::validateProgram(p);
    return p;
}

inline Program parseProgram(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw SyntaxError(e.what());
    }
    return parseProgramJson(doc);
}

// ---------------------------------------------------------------------------
// Serialization (canonical form; parse(serialize(parse(x))) == parse(x))
// ---------------------------------------------------------------------------

namespace detail {

inline Json exprToJson(const Expr& e) {
    if (e.op == Op::Literal) {
        if (e.literal.isNumber()) return e.literal.asNumber();
        if (e.literal.isBool()) return e.literal.asBool();
        return e.literal.asString();
    }
    Json j;
    j["op"] = opcodeName(e.op);
    Json args = Json::object();
    switch (e.op) {
        case Op::VariableRef: args["variable"] = e.name; break;
        case Op::TouchingSprite: case Op::DistanceTo: args["target"] = e.name; break;
        case Op::KeyDown: args["key"] = e.name; break;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        case Op::Lt: case Op::Gt: case Op::Eq: case Op::And: case Op::Or:
            args["a"] = exprToJson(e.operands[0]);
            args["b"] = exprToJson(e.operands[1]);
            break;
        case Op::Not: args["a"] = exprToJson(e.operands[0]); break;
        case Op::PickRandom:
            args["from"] = exprToJson(e.operands[0]);
            args["to"] = exprToJson(e.operands[1]);
            break;
        default: break;
    }
    if (!args.empty()) j["args"] = args;
    return j;
}

inline Json blockListToJson(const std::vector<Block>& blocks);

inline Json blockToJson(const Block& b) {
    Json j;
    j["op"] = opcodeName(b.op);
    j["id"] = b.id;
    Json args = Json::object();
    for (const auto& [k, e] : b.args) args[k] = exprToJson(e);
    switch (b.op) {
        case Op::CreateCloneOf: args["target"] = b.strArg; break;
        case Op::Broadcast: case Op::BroadcastAndWait: args["message"] = b.strArg; break;
        case Op::CallProcedure: args["name"] = b.strArg; break;
        case Op::SetVariable: case Op::ChangeVariableBy: args["variable"] = b.strArg; break;
        default: break;
    }
    if (!args.empty()) j["args"] = args;
    if (!b.children.empty()) {
        Json kids = Json::array();
        for (const auto& c : b.children) kids.push_back(blockListToJson(c));
        j["children"] = kids;
    }
    return j;
}

inline Json blockListToJson(const std::vector<Block>& blocks) {
    Json arr = Json::array();
    for (const auto& b : blocks) arr.push_back(blockToJson(b));
    return arr;
}

inline Json hatToJson(const Hat& h) {
    Json j;
    j["id"] = h.id;
    switch (h.kind) {
        case HatKind::GreenFlag: j["event"] = "greenFlag"; break;
        case HatKind::KeyPressed: j["event"] = "keyPressed"; j["key"] = h.key; break;
        case HatKind::SpriteClicked: j["event"] = "spriteClicked"; break;
        case HatKind::StageClicked: j["event"] = "stageClicked"; break;
        case HatKind::ReceiveMessage: j["event"] = "receiveMessage"; j["message"] = h.message; break;
        case HatKind::StartAsClone: j["event"] = "startAsClone"; break;
        case HatKind::LoudnessGreater: j["event"] = "loudnessGreater"; j["threshold"] = h.threshold; break;
    }
    return j;
}

inline Json spriteToJson(const SpriteDef& s) {
    Json j;
    j["name"] = s.name;
    j["x"] = s.x;
    j["y"] = s.y;
    j["width"] = s.width;
    j["height"] = s.height;
    j["visible"] = s.visible;
    Json scripts = Json::array();
    for (const auto& sc : s.scripts) {
        Json sj;
        sj["hat"] = hatToJson(sc.hat);
        sj["body"] = blockListToJson(sc.body);
        scripts.push_back(sj);
    }
    j["scripts"] = scripts;
    Json procs = Json::object();
    for (const auto& [pn, body] : s.procedures) procs[pn] = blockListToJson(body);
    j["procedures"] = procs;
    return j;
}

} // namespace detail

inline Json serializeProgram(const Program& p) {
    Json j;
    j["stageWidth"] = p.stageWidth;
    j["stageHeight"] = p.stageHeight;
    j["stage"] = detail::spriteToJson(p.stage);
    Json sprites = Json::array();
    for (const auto& s : p.sprites) sprites.push_back(detail::spriteToJson(s));
    j["sprites"] = sprites;
    Json vars = Json::object();
    for (const auto& [name, v] : p.variables) {
        if (v.isNumber()) vars[name] = v.asNumber();
        else if (v.isBool()) vars[name] = v.asBool();
        else vars[name] = v.asString();
    }
    j["variables"] = vars;
    return j;
}

// ---------------------------------------------------------------------------
// Static facts feeding the event grammar
// ---------------------------------------------------------------------------

// Everything determineEvents needs that can be read off the program text:
// handled keys, sensed keys, clickable sprites, ask/mouse usage, loudness
// thresholds, distinct delay literals and string literals. All lists are
// deduplicated and kept in document order (delays additionally get sorted
// by the menu, not here).
struct StaticFacts {
    std::vector<std::string> handledKeys;     // KeyPressed hats
    std::vector<std::string> sensedKeys;      // keyDown() expressions
    std::vector<std::string> clickableSprites;
    bool stageClickable = false;
    bool usesAnswer = false;
    bool usesMouseDown = false;
    bool usesMousePosition = false;
    std::vector<double> loudnessThresholds;   // LoudnessGreater hats
    std::vector<double> delaySeconds;         // literal wait/say/glide durations
    std::vector<std::string> stringLiterals;
};

namespace detail {
template <typename T>
void pushUnique(std::vector<T>& v, const T& x) {
    for (const auto& e : v)
        if (e == x) return;
    v.push_back(x);
}
} // namespace detail

inline StaticFacts collectStaticFacts(const Program& p) {
    StaticFacts f;
    auto scanExpr = [&](const Expr& root) {
        detail::forEachExpr(root, [&](const Expr& e) {
            switch (e.op) {
                case Op::KeyDown: detail::pushUnique(f.sensedKeys, e.name); break;
                case Op::Answer: f.usesAnswer = true; break;
                case Op::MouseDown: f.usesMouseDown = true; break;
                case Op::MouseX: case Op::MouseY: f.usesMousePosition = true; break;
                case Op::Literal:
                    if (e.literal.isString())
                        detail::pushUnique(f.stringLiterals, e.literal.asString());
                    break;
                default: break;
            }
        });
    };
    auto scanBlocks = [&](const std::vector<Block>& blocks) {
        detail::forEachBlock(blocks, [&](const Block& b) {
            auto delayArg = [&](const char* key) {
                auto it = b.args.find(key);
                if (it != b.args.end() && it->second.op == Op::Literal &&
                    it->second.literal.isNumber())
                    detail::pushUnique(f.delaySeconds, it->second.literal.asNumber());
            };
            if (b.op == Op::Wait || b.op == Op::SayForSecs || b.op == Op::GlideSecsToXY)
                delayArg("seconds");
            for (const auto& [k, e] : b.args) { (void)k; scanExpr(e); }
        });
    };
    for (const auto* a : p.actors()) {
        bool isStage = (a == &p.stage);
        for (const auto& sc : a->scripts) {
            switch (sc.hat.kind) {
                case HatKind::KeyPressed: detail::pushUnique(f.handledKeys, sc.hat.key); break;
                case HatKind::SpriteClicked:
                    if (isStage) f.stageClickable = true;
                    else detail::pushUnique(f.clickableSprites, a->name);
                    break;
                case HatKind::StageClicked: f.stageClickable = true; break;
                case HatKind::LoudnessGreater:
                    detail::pushUnique(f.loudnessThresholds, sc.hat.threshold); break;
                default: break;
            }
            scanBlocks(sc.body);
        }
        for (const auto& [pn, body] : a->procedures) { (void)pn; scanBlocks(body); }
    }
    return f;
}

} // namespace blockevo
