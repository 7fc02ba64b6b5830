#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "blockevo/distance.hpp"
#include "blockevo/events.hpp"
#include "blockevo/program.hpp"
#include "blockevo/rng.hpp"

namespace blockevo {

// ---------------------------------------------------------------------------
// Step configuration and clock arithmetic
// ---------------------------------------------------------------------------

inline constexpr double kDefaultStepMs = 100.0 / 3.0; // ~30 steps per second

struct StepConfig {
    double stepDurationMs = kDefaultStepMs; // virtual ms advanced per step
    double accelerationFactor = 1.0;        // divides perceived durations

    // Steps spanned by a duration of d virtual ms: ceil((d/k) / stepDuration).
    // Quotients that land on an integer up to fp noise are snapped so the law
    // holds exactly for decimal inputs.
    int64_t stepsFor(double durationMs) const {
        if (durationMs <= 0) return 0;
        double q = durationMs / (accelerationFactor * stepDurationMs);
        double r = std::nearbyint(q);
        if (std::fabs(q - r) < 1e-9) return static_cast<int64_t>(r);
        return static_cast<int64_t>(std::ceil(q));
    }
};

// Synthetic CFG nodes, with an id scheme shared between the VM trace and
// the CFG builder: one "event occurs" node per script, one regular-end node
// per script, one end node per procedure body.
inline constexpr BlockId kEventNodeBase = 1 << 20;
inline constexpr BlockId kScriptEndBase = 2 << 20;
inline constexpr BlockId kProcEndBase = 3 << 20;
inline BlockId eventNodeId(BlockId hatId) { return hatId + kEventNodeBase; }
inline BlockId scriptEndId(BlockId hatId) { return hatId + kScriptEndBase; }
inline BlockId procEndId(int procIndex) { return kProcEndBase + procIndex; }
inline bool isEventNode(BlockId id) { return id >= kEventNodeBase && id < kScriptEndBase; }

inline constexpr BlockId kEntryNode = -1;
inline constexpr BlockId kExitNode = -2;

// Document-order enumeration of procedures, shared between CFG and VM.
inline std::map<std::pair<std::string, std::string>, int>
procedureIndices(const Program& p) {
    std::map<std::pair<std::string, std::string>, int> out;
    int n = 0;
    for (const SpriteDef* a : p.actors())
        for (const auto& [pn, body] : a->procedures) {
            (void)body;
            out[{a->name, pn}] = n++;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

struct BranchRecord {
    double minTrue = std::numeric_limits<double>::infinity();
    double minFalse = std::numeric_limits<double>::infinity();

    void update(double dTrue, double dFalse) {
        minTrue = std::min(minTrue, dTrue);
        minFalse = std::min(minFalse, dFalse);
    }
    double forOutcome(bool outcome) const { return outcome ? minTrue : minFalse; }
};

struct RuntimeFault {
    BlockId block;
    std::string kind;
};

struct StepRecord {
    double clockMs;
    std::vector<BlockId> executed;
};

struct ExecutionTrace {
    std::set<BlockId> executedBlockIds;
    std::vector<StepRecord> perStep;              // only filled when recording
    std::map<BlockId, BranchRecord> branchRecords; // statements and event nodes
    std::vector<std::pair<int64_t, EventDescriptor>> eventLog;
    std::vector<RuntimeFault> faults;
    int64_t stepsExecuted = 0;
    bool budgetExceeded = false;

    bool executed(BlockId id) const { return executedBlockIds.count(id) > 0; }
};

// ---------------------------------------------------------------------------
// Runtime state
// ---------------------------------------------------------------------------

struct SpriteInstance {
    std::string instanceId;     // sprite name, or name#n for clones
    const SpriteDef* def = nullptr;
    int defIndex = 0;           // document order of the defining sprite
    bool isClone = false;
    bool alive = true;
    double x = 0, y = 0;
    double width = 0, height = 0;
    bool visible = true;
    double direction = 90;      // degrees, 90 = right, 0 = up
    std::string sayText;
};

class Vm {
public:
    Vm(const Program& program, StepConfig cfg, uint64_t seed)
        : program_(&program), cfg_(cfg), rng_(seed), seed_(seed),
          procIdx_(procedureIndices(program)) {
        reset();
    }

    // Back to the initial state: declared sprite states, green-flag threads,
    // clock 0, reseeded rng.
    void reset() {
        instances_.clear();
        threads_.clear();
        trace_ = ExecutionTrace{};
        rng_ = Rng(seed_);
        step_ = 0;
        halted_ = false;
        answer_.clear();
        mouseX_ = mouseY_ = 0;
        mouseDown_ = false;
        keysDown_.clear();
        ephemeralKeys_.clear();
        loudness_ = 0;
        askQueue_.clear();
        cloneCounters_.clear();
        doneThreads_.clear();
        nextThreadId_ = 1;

        int defIdx = 0;
        for (const SpriteDef* def : program_->actors()) {
            SpriteInstance inst;
            inst.instanceId = def->name;
            inst.def = def;
            inst.defIndex = defIdx++;
            inst.x = def->x;
            inst.y = def->y;
            inst.width = def->width;
            inst.height = def->height;
            inst.visible = def->visible;
            instances_.push_back(inst);
        }
        variables_.clear();
        for (const auto& [name, init] : program_->variables) variables_[name] = init;

        // Every event node starts recorded: the dispatcher is always live,
        // and "event did not occur" trivially holds until it fires.
        for (const SpriteDef* def : program_->actors()) {
            for (const auto& sc : def->scripts) {
                double initTrue = 1.0;
                if (sc.hat.kind == HatKind::LoudnessGreater)
                    initTrue = std::max(0.0, sc.hat.threshold + 1.0 - loudness_);
                trace_.branchRecords[eventNodeId(sc.hat.id)].update(initTrue, 0.0);
            }
        }

        // Green flag fires once at the start of every run.
        for (size_t i = 0; i < instances_.size(); ++i)
            for (const auto& sc : instances_[i].def->scripts)
                if (sc.hat.kind == HatKind::GreenFlag) fireScript(i, sc);
    }

    const Program& program() const { return *program_; }
    const StepConfig& config() const { return cfg_; }
    ExecutionTrace& trace() { return trace_; }
    const ExecutionTrace& trace() const { return trace_; }
    bool halted() const { return halted_; }
    int64_t currentStep() const { return step_; }
    double clockMs() const { return static_cast<double>(step_) * cfg_.stepDurationMs; }
    void setRecordSteps(bool on) { recordSteps_ = on; }

    const std::vector<SpriteInstance>& instances() const { return instances_; }
    const SpriteInstance* findInstance(const std::string& id) const {
        for (const auto& inst : instances_)
            if (inst.alive && inst.instanceId == id) return &inst;
        return nullptr;
    }
    const Value* variable(const std::string& name) const {
        auto it = variables_.find(name);
        return it == variables_.end() ? nullptr : &it->second;
    }
    const std::string& answer() const { return answer_; }
    bool askPending() const { return !askQueue_.empty(); }
    int liveThreadCount() const {
        int n = 0;
        for (const auto& t : threads_)
            if (t.status != Thread::Status::Done) ++n;
        return n;
    }
    int liveCloneCount() const {
        int n = 0;
        for (const auto& inst : instances_)
            if (inst.alive && inst.isClone) ++n;
        return n;
    }

    // One scheduler step: inputs first, then every runnable thread up to its
    // yield point, then the clock advances. A halted VM stays untouched.
    void step(const EventList& events) {
        if (halted_) return;
        if (recordSteps_) {
            perStepScratch_.clear();
        }
        for (const auto& e : events) applyEvent(e);
        for (size_t i = 0; i < threads_.size() && !halted_; ++i) serviceThread(threads_[i]);
        if (recordSteps_)
            trace_.perStep.push_back({clockMs(), perStepScratch_});
        ++step_;
        ++trace_.stepsExecuted;
        ephemeralKeys_.clear();
        if (loudness_ != 0) loudness_ = 0; // Sound events last one step
        compactThreads();
    }

    // Apply one test event and run the steps its duration spans.
    // Instantaneous events take one step; Wait(d) spans ceil((d/k)/delta).
    void runEvent(const EventDescriptor& e, int64_t maxSteps = -1) {
        int64_t steps = 1;
        if (e.kind == EventDescriptor::Kind::Wait)
            steps = std::max<int64_t>(1, cfg_.stepsFor(e.durationMs));
        for (int64_t i = 0; i < steps; ++i) {
            if (halted_) return;
            if (maxSteps >= 0 && trace_.stepsExecuted >= maxSteps) {
                trace_.budgetExceeded = true;
                return;
            }
            step(i == 0 ? EventList{e} : EventList{});
        }
    }

    // Instrumented predicate evaluation for the instance that owns the
    // expression. Returns truth value plus the distance pair.
    DistPair evalPredicate(size_t instanceIdx, const Expr& e) {
        return evalPred(instances_[instanceIdx], e);
    }

    Value evalExpression(size_t instanceIdx, const Expr& e) {
        return eval(instances_[instanceIdx], e);
    }

private:
    struct Frame {
        enum class Kind { Body, Repeat, Forever, Procedure };
        Kind kind = Kind::Body;
        const std::vector<Block>* blocks = nullptr;
        size_t index = 0;
        int64_t remaining = 0;      // Repeat
        const Block* owner = nullptr;
        BlockId endNode = 0;        // Procedure: recorded when the frame pops
    };

    struct Thread {
        enum class Status {
            Running, WaitingSteps, WaitingUntil, WaitingAsk, WaitingBroadcast,
            Gliding, Done
        };
        uint64_t id = 0;
        size_t instance = 0;
        const Script* script = nullptr;
        std::vector<Frame> stack;
        Status status = Status::Running;
        int64_t wakeStep = 0;
        bool clearSayOnWake = false;
        double glideFromX = 0, glideFromY = 0, glideToX = 0, glideToY = 0;
        int64_t glideStart = 0, glideEnd = 0;
        std::vector<uint64_t> awaited; // broadcastAndWait children
    };

    // --- event injection ---------------------------------------------------

    void applyEvent(const EventDescriptor& e) {
        trace_.eventLog.emplace_back(step_, e);
        using K = EventDescriptor::Kind;
        switch (e.kind) {
            case K::KeyPress: {
                ephemeralKeys_.insert(e.key);
                for (size_t i = 0; i < instances_.size(); ++i) {
                    if (!instances_[i].alive) continue;
                    for (const auto& sc : instances_[i].def->scripts)
                        if (sc.hat.kind == HatKind::KeyPressed && sc.hat.key == e.key)
                            fireScript(i, sc);
                }
                break;
            }
            case K::KeyDown: {
                if (keysDown_.count(e.key)) keysDown_.erase(e.key);
                else keysDown_.insert(e.key);
                break;
            }
            case K::ClickSprite: {
                for (size_t i = 0; i < instances_.size(); ++i) {
                    if (!instances_[i].alive || instances_[i].instanceId != e.target) continue;
                    for (const auto& sc : instances_[i].def->scripts)
                        if (sc.hat.kind == HatKind::SpriteClicked) fireScript(i, sc);
                }
                break;
            }
            case K::ClickStage: {
                for (const auto& sc : instances_[0].def->scripts)
                    if (sc.hat.kind == HatKind::StageClicked ||
                        sc.hat.kind == HatKind::SpriteClicked)
                        fireScript(0, sc);
                break;
            }
            case K::TypeText: {
                answer_ = e.text;
                if (!askQueue_.empty()) {
                    uint64_t tid = askQueue_.front();
                    askQueue_.erase(askQueue_.begin());
                    if (Thread* t = findThread(tid))
                        if (t->status == Thread::Status::WaitingAsk)
                            t->status = Thread::Status::Running;
                }
                break;
            }
            case K::MouseDown: mouseDown_ = !mouseDown_; break;
            case K::MouseMove: mouseX_ = e.x; mouseY_ = e.y; break;
            case K::Sound: {
                loudness_ = std::clamp(e.volume, 0.0, 100.0);
                for (size_t i = 0; i < instances_.size(); ++i) {
                    if (!instances_[i].alive) continue;
                    for (const auto& sc : instances_[i].def->scripts) {
                        if (sc.hat.kind != HatKind::LoudnessGreater) continue;
                        double d = std::max(0.0, sc.hat.threshold + 1.0 - loudness_);
                        trace_.branchRecords[eventNodeId(sc.hat.id)].update(d, 0.0);
                        if (loudness_ > sc.hat.threshold) fireScript(i, sc);
                    }
                }
                break;
            }
            case K::Wait: break;
        }
    }

    // --- thread lifecycle ----------------------------------------------------

    Thread* findThread(uint64_t id) {
        for (auto& t : threads_)
            if (t.id == id) return &t;
        return nullptr;
    }

    // Firing a script restarts any running instance of it on the same actor.
    uint64_t fireScript(size_t instanceIdx, const Script& sc) {
        for (auto& t : threads_)
            if (t.instance == instanceIdx && t.script == &sc &&
                t.status != Thread::Status::Done)
                t.status = Thread::Status::Done;
        Thread t;
        t.id = nextThreadId_++;
        t.instance = instanceIdx;
        t.script = &sc;
        t.stack.push_back(Frame{Frame::Kind::Body, &sc.body, 0, 0, nullptr});
        markExecuted(sc.hat.id);
        trace_.branchRecords[eventNodeId(sc.hat.id)].update(0.0, 0.0);
        threads_.push_back(std::move(t));
        return threads_.back().id;
    }

    void compactThreads() {
        bool anyDone = false;
        for (const auto& t : threads_)
            if (t.status == Thread::Status::Done) { anyDone = true; break; }
        if (!anyDone) return;
        // Other threads may still await these ids; drop only when nothing waits.
        std::set<uint64_t> awaited;
        for (const auto& t : threads_)
            if (t.status == Thread::Status::WaitingBroadcast)
                awaited.insert(t.awaited.begin(), t.awaited.end());
        std::vector<Thread> keep;
        keep.reserve(threads_.size());
        for (auto& t : threads_)
            if (t.status != Thread::Status::Done || awaited.count(t.id)) {
                keep.push_back(std::move(t));
            } else {
                doneThreads_.insert(t.id);
            }
        threads_ = std::move(keep);
    }

    bool threadFinished(uint64_t id) {
        if (doneThreads_.count(id)) return true;
        Thread* t = findThread(id);
        return !t || t->status == Thread::Status::Done;
    }

    void serviceThread(Thread& t) {
        switch (t.status) {
            case Thread::Status::Done:
            case Thread::Status::WaitingAsk:
                return;
            case Thread::Status::WaitingSteps:
                if (step_ < t.wakeStep) return;
                if (t.clearSayOnWake) {
                    instances_[t.instance].sayText.clear();
                    t.clearSayOnWake = false;
                }
                t.status = Thread::Status::Running;
                break;
            case Thread::Status::Gliding: {
                auto& inst = instances_[t.instance];
                int64_t total = t.glideEnd - t.glideStart;
                int64_t done = step_ - t.glideStart + 1;
                if (done >= total) {
                    inst.x = t.glideToX;
                    inst.y = t.glideToY;
                    t.status = Thread::Status::Running;
                    return; // resumes next statement on the following step
                }
                double f = static_cast<double>(done) / static_cast<double>(total);
                inst.x = t.glideFromX + (t.glideToX - t.glideFromX) * f;
                inst.y = t.glideFromY + (t.glideToY - t.glideFromY) * f;
                return;
            }
            case Thread::Status::WaitingBroadcast: {
                for (uint64_t id : t.awaited)
                    if (!threadFinished(id)) return;
                t.awaited.clear();
                t.status = Thread::Status::Running;
                break;
            }
            case Thread::Status::WaitingUntil:
            case Thread::Status::Running:
                break;
        }
        runUntilYield(t);
    }

    void runUntilYield(Thread& t) {
        t.status = Thread::Status::Running;
        int guard = 100000;
        while (t.status == Thread::Status::Running && !halted_) {
            if (--guard == 0) {
                trace_.faults.push_back({currentBlockId(t), "step-budget"});
                return; // forced yield; resumes next step
            }
            if (t.stack.empty()) {
                // regular script completion, as opposed to a kill/restart
                BlockId end = scriptEndId(t.script->hat.id);
                markExecuted(end);
                recordBranch(end, DistPair{true, 0.0, 1.0});
                t.status = Thread::Status::Done;
                return;
            }
            Frame& f = t.stack.back();
            if (f.index >= f.blocks->size()) {
                switch (f.kind) {
                    case Frame::Kind::Forever:
                        f.index = 0;
                        recordBranch(f.owner->id, DistPair{true, 0.0, 1.0});
                        return; // yield at end of each iteration
                    case Frame::Kind::Repeat:
                        --f.remaining;
                        recordBranch(f.owner->id,
                                     f.remaining > 0 ? DistPair{true, 0.0, 1.0}
                                                     : DistPair{false, 1.0, 0.0});
                        if (f.remaining > 0) { f.index = 0; return; }
                        t.stack.pop_back();
                        return; // loop exit is still an iteration boundary
                    case Frame::Kind::Procedure:
                        markExecuted(f.endNode);
                        recordBranch(f.endNode, DistPair{true, 0.0, 1.0});
                        t.stack.pop_back();
                        continue;
                    case Frame::Kind::Body:
                        t.stack.pop_back();
                        continue;
                }
            }
            const Block& b = (*f.blocks)[f.index];
            if (!execBlock(t, f, b)) return; // yielded
        }
    }

    BlockId currentBlockId(const Thread& t) const {
        for (auto it = t.stack.rbegin(); it != t.stack.rend(); ++it)
            if (it->index < it->blocks->size()) return (*it->blocks)[it->index].id;
        return t.script->hat.id;
    }

    // Executes one statement. Returns false when the thread yielded.
    bool execBlock(Thread& t, Frame& f, const Block& b) {
        auto& inst = instances_[t.instance];
        markExecuted(b.id);
        switch (b.op) {
            case Op::Wait: {
                double secs = eval(inst, b.args.at("seconds")).asNumber();
                int64_t steps = std::max<int64_t>(1, cfg_.stepsFor(secs * 1000.0));
                t.wakeStep = step_ + steps;
                t.status = Thread::Status::WaitingSteps;
                ++f.index;
                return false;
            }
            case Op::Forever: {
                ++f.index;
                t.stack.push_back(Frame{Frame::Kind::Forever, &b.children[0], 0, 0, &b});
                return true;
            }
            case Op::Repeat: {
                double n = eval(inst, b.args.at("times")).asNumber();
                int64_t count = static_cast<int64_t>(std::llround(n));
                ++f.index;
                if (count > 0) {
                    recordBranch(b.id, DistPair{true, 0.0, 1.0});
                    t.stack.push_back(Frame{Frame::Kind::Repeat, &b.children[0], 0, count, &b});
                } else {
                    recordBranch(b.id, DistPair{false, 1.0, 0.0});
                }
                return true;
            }
            case Op::If: {
                DistPair d = evalPred(inst, b.args.at("condition"));
                recordBranch(b.id, d);
                ++f.index;
                if (d.value)
                    t.stack.push_back(Frame{Frame::Kind::Body, &b.children[0], 0, 0, &b});
                return true;
            }
            case Op::IfElse: {
                DistPair d = evalPred(inst, b.args.at("condition"));
                recordBranch(b.id, d);
                ++f.index;
                t.stack.push_back(
                    Frame{Frame::Kind::Body, &b.children[d.value ? 0 : 1], 0, 0, &b});
                return true;
            }
            case Op::WaitUntil: {
                DistPair d = evalPred(inst, b.args.at("condition"));
                recordBranch(b.id, d);
                if (d.value) { ++f.index; return true; }
                t.status = Thread::Status::WaitingUntil; // re-evaluated next step
                return false;
            }
            case Op::StopAll:
                halted_ = true;
                for (auto& th : threads_) th.status = Thread::Status::Done;
                return false;
            case Op::CreateCloneOf: {
                recordBranch(b.id, DistPair{true, 0.0, 1.0});
                spawnClone(b.strArg);
                ++f.index;
                return true;
            }
            case Op::DeleteThisClone: {
                ++f.index;
                if (!inst.isClone) return true;
                inst.alive = false;
                for (auto& th : threads_)
                    if (th.instance == t.instance) th.status = Thread::Status::Done;
                return false;
            }
            case Op::Broadcast: {
                recordBranch(b.id, DistPair{true, 0.0, 1.0});
                broadcast(b.strArg);
                ++f.index;
                return true;
            }
            case Op::BroadcastAndWait: {
                recordBranch(b.id, DistPair{true, 0.0, 1.0});
                std::vector<uint64_t> spawned = broadcast(b.strArg);
                ++f.index;
                if (spawned.empty()) return true;
                t.awaited = std::move(spawned);
                t.status = Thread::Status::WaitingBroadcast;
                return false;
            }
            case Op::CallProcedure: {
                recordBranch(b.id, DistPair{true, 0.0, 1.0});
                ++f.index;
                int depth = 0;
                for (const auto& fr : t.stack)
                    if (fr.kind == Frame::Kind::Procedure) ++depth;
                if (depth >= 64) {
                    trace_.faults.push_back({b.id, "call-depth"});
                    return true;
                }
                const std::vector<Block>* body = nullptr;
                for (const auto& [pn, blocks] : inst.def->procedures)
                    if (pn == b.strArg) { body = &blocks; break; }
                BlockId end = procEndId(procIdx_.at({inst.def->name, b.strArg}));
                if (body && !body->empty()) {
                    t.stack.push_back(Frame{Frame::Kind::Procedure, body, 0, 0, &b, end});
                } else {
                    markExecuted(end);
                    recordBranch(end, DistPair{true, 0.0, 1.0});
                }
                return true;
            }
            case Op::GoToXY:
                inst.x = eval(inst, b.args.at("x")).asNumber();
                inst.y = eval(inst, b.args.at("y")).asNumber();
                ++f.index;
                return true;
            case Op::ChangeXBy:
                inst.x += eval(inst, b.args.at("dx")).asNumber();
                ++f.index;
                return true;
            case Op::ChangeYBy:
                inst.y += eval(inst, b.args.at("dy")).asNumber();
                ++f.index;
                return true;
            case Op::GlideSecsToXY: {
                double secs = eval(inst, b.args.at("seconds")).asNumber();
                t.glideFromX = inst.x;
                t.glideFromY = inst.y;
                t.glideToX = eval(inst, b.args.at("x")).asNumber();
                t.glideToY = eval(inst, b.args.at("y")).asNumber();
                int64_t steps = std::max<int64_t>(1, cfg_.stepsFor(secs * 1000.0));
                t.glideStart = step_;
                t.glideEnd = step_ + steps;
                t.status = Thread::Status::Gliding;
                ++f.index;
                return false;
            }
            case Op::PointInDirection:
                inst.direction = normalizeDirection(
                    eval(inst, b.args.at("direction")).asNumber());
                ++f.index;
                return true;
            case Op::IfOnEdgeBounce: {
                bounceOffEdge(inst);
                ++f.index;
                return true;
            }
            case Op::SayForSecs: {
                inst.sayText = eval(inst, b.args.at("message")).asString();
                double secs = eval(inst, b.args.at("seconds")).asNumber();
                int64_t steps = std::max<int64_t>(1, cfg_.stepsFor(secs * 1000.0));
                t.wakeStep = step_ + steps;
                t.clearSayOnWake = true;
                t.status = Thread::Status::WaitingSteps;
                ++f.index;
                return false;
            }
            case Op::Say:
                inst.sayText = eval(inst, b.args.at("message")).asString();
                ++f.index;
                return true;
            case Op::Show: inst.visible = true; ++f.index; return true;
            case Op::Hide: inst.visible = false; ++f.index; return true;
            case Op::SetVariable:
                variables_[b.strArg] = eval(inst, b.args.at("value"));
                ++f.index;
                return true;
            case Op::ChangeVariableBy: {
                double cur = 0;
                auto it = variables_.find(b.strArg);
                if (it != variables_.end()) cur = it->second.asNumber();
                variables_[b.strArg] =
                    Value(cur + eval(inst, b.args.at("value")).asNumber());
                ++f.index;
                return true;
            }
            case Op::AskAndWait: {
                eval(inst, b.args.at("prompt")); // prompt shown headlessly
                askQueue_.push_back(t.id);
                t.status = Thread::Status::WaitingAsk;
                ++f.index;
                return false;
            }
            default:
                // expression opcodes cannot appear as statements (parser rejects)
                ++f.index;
                return true;
        }
    }

    void spawnClone(const std::string& spriteName) {
        if (spriteName == program_->stage.name) {
            trace_.faults.push_back({-1, "clone-stage"});
            return;
        }
        if (liveCloneCount() >= 300) return; // silent cap
        const SpriteInstance* original = nullptr;
        for (const auto& inst : instances_)
            if (!inst.isClone && inst.instanceId == spriteName) { original = &inst; break; }
        if (!original) return;
        SpriteInstance clone = *original;
        clone.isClone = true;
        clone.alive = true;
        int n = ++cloneCounters_[spriteName];
        clone.instanceId = spriteName + "#" + std::to_string(n);
        clone.sayText.clear();
        instances_.push_back(clone);
        size_t idx = instances_.size() - 1;
        for (const auto& sc : instances_[idx].def->scripts)
            if (sc.hat.kind == HatKind::StartAsClone) fireScript(idx, sc);
    }

    std::vector<uint64_t> broadcast(const std::string& message) {
        std::vector<uint64_t> spawned;
        for (size_t i = 0; i < instances_.size(); ++i) {
            if (!instances_[i].alive) continue;
            for (const auto& sc : instances_[i].def->scripts)
                if (sc.hat.kind == HatKind::ReceiveMessage && sc.hat.message == message)
                    spawned.push_back(fireScript(i, sc));
        }
        return spawned;
    }

    static double normalizeDirection(double d) {
        d = std::fmod(d, 360.0);
        if (d > 180.0) d -= 360.0;
        if (d <= -180.0) d += 360.0;
        return d;
    }

    void bounceOffEdge(SpriteInstance& inst) {
        double W = program_->stageWidth / 2.0, H = program_->stageHeight / 2.0;
        double hw = inst.width / 2.0, hh = inst.height / 2.0;
        bool left = inst.x - hw <= -W, right = inst.x + hw >= W;
        bool bottom = inst.y - hh <= -H, top = inst.y + hh >= H;
        // vertical walls mirror the horizontal component, horizontal walls the vertical one
        if (left || right) inst.direction = normalizeDirection(-inst.direction);
        if (top || bottom) inst.direction = normalizeDirection(180.0 - inst.direction);
        inst.x = std::clamp(inst.x, -W + hw, W - hw);
        inst.y = std::clamp(inst.y, -H + hh, H - hh);
    }

    void markExecuted(BlockId id) {
        trace_.executedBlockIds.insert(id);
        if (recordSteps_) perStepScratch_.push_back(id);
    }

    void recordBranch(BlockId id, const DistPair& d) {
        trace_.branchRecords[id].update(d.toTrue, d.toFalse);
    }

    // --- expression evaluation ----------------------------------------------

    Value eval(const SpriteInstance& self, const Expr& e) {
        switch (e.op) {
            case Op::Literal: return e.literal;
            case Op::VariableRef: {
                auto it = variables_.find(e.name);
                return it == variables_.end() ? Value(0.0) : it->second;
            }
            case Op::Add: return Value(num(self, e, 0) + num(self, e, 1));
            case Op::Sub: return Value(num(self, e, 0) - num(self, e, 1));
            case Op::Mul: return Value(num(self, e, 0) * num(self, e, 1));
            case Op::Div: {
                double a = num(self, e, 0), b = num(self, e, 1);
                if (b == 0.0) {
                    trace_.faults.push_back({-1, "div-by-zero"});
                    return Value(0.0); // keeps distances finite
                }
                return Value(a / b);
            }
            case Op::PickRandom: {
                double a = num(self, e, 0), b = num(self, e, 1);
                double lo = std::min(a, b), hi = std::max(a, b);
                if (lo == std::floor(lo) && hi == std::floor(hi))
                    return Value(static_cast<double>(
                        rng_.intIn(static_cast<int64_t>(lo), static_cast<int64_t>(hi))));
                return Value(rng_.realIn(lo, hi));
            }
            case Op::MouseX: return Value(mouseX_);
            case Op::MouseY: return Value(mouseY_);
            case Op::PositionX: return Value(self.x);
            case Op::PositionY: return Value(self.y);
            case Op::Loudness: return Value(loudness_);
            case Op::Answer: return Value(answer_);
            case Op::DistanceTo: return Value(distanceToSprite(self, e.name));
            default: {
                DistPair d = evalPred(self, e);
                return Value(d.value);
            }
        }
    }

    double num(const SpriteInstance& self, const Expr& e, size_t i) {
        return eval(self, e.operands[i]).asNumber();
    }

    DistPair evalPred(const SpriteInstance& self, const Expr& e) {
        switch (e.op) {
            case Op::Gt: {
                Value a = eval(self, e.operands[0]), b = eval(self, e.operands[1]);
                return gtDistance(a.asNumber(), b.asNumber());
            }
            case Op::Lt: {
                Value a = eval(self, e.operands[0]), b = eval(self, e.operands[1]);
                return ltDistance(a.asNumber(), b.asNumber());
            }
            case Op::Eq: {
                Value a = eval(self, e.operands[0]), b = eval(self, e.operands[1]);
                if (a.isNumericLike() && b.isNumericLike())
                    return eqDistance(a.asNumber(), b.asNumber());
                return eqStringDistance(a.asString() == b.asString());
            }
            case Op::And:
                return andDistance(evalPred(self, e.operands[0]),
                                   evalPred(self, e.operands[1]));
            case Op::Or:
                return orDistance(evalPred(self, e.operands[0]),
                                  evalPred(self, e.operands[1]));
            case Op::Not: return notDistance(evalPred(self, e.operands[0]));
            case Op::KeyDown:
                return boolDistance(keysDown_.count(e.name) > 0 ||
                                    ephemeralKeys_.count(e.name) > 0);
            case Op::MouseDown: return boolDistance(mouseDown_);
            case Op::TouchingSprite: return touchingSprite(self, e.name);
            case Op::TouchingEdge: return touchingEdge(self);
            default:
                return boolDistance(eval(self, e).asBool());
        }
    }

    double stageDiagonal() const {
        return std::hypot(program_->stageWidth, program_->stageHeight);
    }

    // Center distance to the nearest live, visible instance of a sprite.
    double distanceToSprite(const SpriteInstance& self, const std::string& name) const {
        double best = stageDiagonal();
        for (const auto& inst : instances_) {
            if (!inst.alive || !inst.visible || inst.def->name != name) continue;
            if (&inst == &self) continue;
            best = std::min(best, std::hypot(inst.x - self.x, inst.y - self.y));
        }
        return best;
    }

    // Touching = AABB overlap with any live visible instance of the target;
    // when apart, the true-distance is the nearest center distance.
    DistPair touchingSprite(const SpriteInstance& self, const std::string& name) {
        bool touching = false;
        double best = stageDiagonal();
        for (const auto& inst : instances_) {
            if (!inst.alive || !inst.visible || inst.def->name != name) continue;
            if (&inst == &self) continue;
            double dx = std::fabs(inst.x - self.x);
            double dy = std::fabs(inst.y - self.y);
            if (self.visible && dx <= (inst.width + self.width) / 2.0 &&
                dy <= (inst.height + self.height) / 2.0)
                touching = true;
            best = std::min(best, std::hypot(inst.x - self.x, inst.y - self.y));
        }
        DistPair d;
        d.value = touching;
        d.toTrue = touching ? 0.0 : best;
        d.toFalse = touching ? 1.0 : 0.0;
        return d;
    }

    // Minimum gap between the sprite's box and the four stage edges.
    DistPair touchingEdge(const SpriteInstance& self) {
        double W = program_->stageWidth / 2.0, H = program_->stageHeight / 2.0;
        double hw = self.width / 2.0, hh = self.height / 2.0;
        double gaps[4] = {
            (self.x - hw) + W,  // left
            W - (self.x + hw),  // right
            (self.y - hh) + H,  // bottom
            H - (self.y + hh),  // top
        };
        double minGap = *std::min_element(gaps, gaps + 4);
        DistPair d;
        d.value = minGap <= 0.0;
        d.toTrue = d.value ? 0.0 : minGap;
        d.toFalse = d.value ? 1.0 : 0.0;
        return d;
    }

    const Program* program_;
    StepConfig cfg_;
    Rng rng_;
    uint64_t seed_;

    std::vector<SpriteInstance> instances_;
    std::vector<Thread> threads_;
    std::map<std::string, Value> variables_;
    ExecutionTrace trace_;
    int64_t step_ = 0;
    bool halted_ = false;
    bool recordSteps_ = false;
    std::vector<BlockId> perStepScratch_;

    std::string answer_;
    double mouseX_ = 0, mouseY_ = 0;
    bool mouseDown_ = false;
    std::set<std::string> keysDown_;
    std::set<std::string> ephemeralKeys_; // KeyPress holds for one step
    double loudness_ = 0;
    std::vector<uint64_t> askQueue_;
    std::map<std::string, int> cloneCounters_;
    std::set<uint64_t> doneThreads_;
    uint64_t nextThreadId_ = 1;
    std::map<std::pair<std::string, std::string>, int> procIdx_;
};

// Deterministic end-to-end run: reset, then send each event and advance the
// steps it spans. maxSteps caps runaway tests; the trace is flagged, not lost.
inline ExecutionTrace runTest(const Program& p, const StepConfig& cfg, uint64_t seed,
                              const EventList& test, int64_t maxSteps = 200000,
                              bool recordSteps = false) {
    Vm vm(p, cfg, seed);
    vm.setRecordSteps(recordSteps);
    for (const auto& e : test) {
        if (vm.halted() || vm.trace().budgetExceeded) break;
        vm.runEvent(e, maxSteps);
    }
    return vm.trace();
}

} // namespace blockevo
