#pragma once

#include <unistd.h>

#include <filesystem>
#include <memory>
#include <string>

#include <gtest/gtest.h>

#include "synthrl/synthrl.hpp"
#include "synthrl/testing/simulated_world.hpp"

namespace synthrl::test {

namespace fs = std::filesystem;

/// Fresh, empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("synthrl_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::unique_ptr<Gateway> scripted_gateway(Responder r, std::size_t max_in_flight = 4, EmbedResponder e = {}) {
    BackendDescriptor d;
    d.max_in_flight = max_in_flight;
    return std::make_unique<Gateway>(std::make_shared<ScriptedBackend>(std::move(r), std::move(e)), d);
}

inline std::unique_ptr<Gateway> table_gateway(ScriptTable t, std::size_t max_in_flight = 4) {
    BackendDescriptor d;
    d.max_in_flight = max_in_flight;
    return std::make_unique<Gateway>(std::make_shared<ScriptedBackend>(std::make_shared<const ScriptTable>(std::move(t))), d);
}

/// Tagged-answer task with no demos, for tests that script replies by hand.
inline TaskDefinition tagged_task() { return presets::logiqa(); }

}  // namespace synthrl::test
