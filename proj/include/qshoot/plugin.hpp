#pragma once

#include "qshoot/manifest.hpp"
#include "qshoot/potentials.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qshoot {

using NumericArray = std::variant<std::vector<std::int32_t>, std::vector<float>, std::vector<double>>;

ScalarType type_of(const NumericArray& a);
std::size_t length_of(const NumericArray& a);

/// A shared library opened against its manifest.
///
/// Calls into non-reentrant functions are serialized per plugin; `reentrant = true` functions run
/// concurrently. Shapes may be changed with override_lengths while calls are in flight; each
/// call validates against the shape current when it starts.
class LoadedPlugin {
public:
    /// Throws PluginLoadError when the library cannot be opened or a declared symbol is missing.
    static std::shared_ptr<LoadedPlugin> load(const std::filesystem::path& library, PluginManifest manifest);

    ~LoadedPlugin();
    LoadedPlugin(const LoadedPlugin&) = delete;
    LoadedPlugin& operator=(const LoadedPlugin&) = delete;

    const std::filesystem::path& library() const { return library_; }
    std::vector<std::string> function_names() const;

    /// Current shape, overrides applied. ShapeError(UnknownFunction) for undeclared names.
    FunctionShape shape(std::string_view name) const;

    /// Validates inputs against the current shape, copies them into guarded scratch buffers,
    /// calls `name(out..., in...)` and returns freshly allocated outputs. Any write past a
    /// buffer raises ShapeError(Overrun).
    std::vector<NumericArray> call(std::string_view name, const std::vector<NumericArray>& inputs) const;

    /// Same as call(), validating against the given lengths instead of the stored shape, which is
    /// left untouched. The function must be overridable.
    std::vector<NumericArray> call_with_lengths(std::string_view name, const std::vector<std::size_t>& in_lengths,
                                                const std::vector<std::size_t>& out_lengths,
                                                const std::vector<NumericArray>& inputs) const;

    /// Replaces the declared lengths of an overridable function; arities must not change.
    FunctionShape override_lengths(std::string_view name, std::vector<std::size_t> in_lengths,
                                   std::vector<std::size_t> out_lengths);

private:
    struct Entry {
        FunctionShape shape;
        void* symbol;
    };

    LoadedPlugin(std::filesystem::path library, void* handle);
    const Entry& entry(std::string_view name) const;
    std::vector<NumericArray> invoke(const Entry& e, const FunctionShape& shape,
                                     const std::vector<NumericArray>& inputs) const;

    std::filesystem::path library_;
    void* handle_;
    std::vector<Entry> entries_;
    mutable std::shared_mutex shapes_mutex_;
    mutable std::mutex call_mutex_;
};

std::shared_ptr<LoadedPlugin> load_plugin(const std::filesystem::path& library, PluginManifest manifest);
std::shared_ptr<LoadedPlugin> load_plugin(const std::filesystem::path& library, const std::filesystem::path& manifest);

/// Wraps a plugin function as a potential.
///
/// Accepted shapes, all overridable: out FLOAT64[1], in FLOAT64[1], optionally followed by an
/// INT32[1] input that receives the element count. With the count input the mesh is evaluated in
/// one call over all radii; without it every radius is a separate call. Anything else raises
/// AdapterError.
PotentialSpec potential_from_plugin(std::shared_ptr<const LoadedPlugin> plugin, std::string_view name);

} // namespace qshoot
