#include "qshoot/plugin.hpp"

#include "qshoot/errors.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <limits>
#include <utility>

namespace qshoot {

ScalarType type_of(const NumericArray& a)
{
    switch (a.index()) {
    case 0:
        return ScalarType::Int32;
    case 1:
        return ScalarType::Float32;
    default:
        return ScalarType::Float64;
    }
}

std::size_t length_of(const NumericArray& a)
{
    return std::visit([](const auto& v) { return v.size(); }, a);
}

namespace {

using Invoker = void (*)(void* fn, void* const* args);

template <std::size_t... I>
void invoke_fixed(void* fn, void* const* args, std::index_sequence<I...>)
{
    using Fn = void (*)(decltype((void)I, static_cast<void*>(nullptr))...);
    reinterpret_cast<Fn>(fn)(args[I]...);
}

template <std::size_t N>
void invoke_n(void* fn, void* const* args)
{
    invoke_fixed(fn, args, std::make_index_sequence<N>{});
}

template <std::size_t... N>
constexpr std::array<Invoker, sizeof...(N)> make_invokers(std::index_sequence<N...>)
{
    return {&invoke_n<N>...};
}

// invokers[k] calls a function of k pointer parameters.
constexpr auto invokers = make_invokers(std::make_index_sequence<max_plugin_arity + 1>{});

constexpr std::size_t guard_bytes = 64;
constexpr unsigned char canary = 0xA5;

/// Array storage fenced by canary bytes on both sides. Data stays 8-byte aligned.
class GuardedBuffer {
public:
    explicit GuardedBuffer(std::size_t bytes)
        : bytes_(bytes), words_((2 * guard_bytes + bytes + 7) / 8)
    {
        storage_ = std::make_unique<std::uint64_t[]>(words_);
        std::memset(raw(), canary, words_ * 8);
        std::memset(data(), 0, bytes_);
    }

    void* data() { return raw() + guard_bytes; }
    const void* data() const { return raw() + guard_bytes; }

    bool intact() const
    {
        const unsigned char* p = raw();
        const std::size_t total = words_ * 8;
        for (std::size_t i = 0; i < guard_bytes; ++i)
            if (p[i] != canary)
                return false;
        for (std::size_t i = guard_bytes + bytes_; i < total; ++i)
            if (p[i] != canary)
                return false;
        return true;
    }

private:
    unsigned char* raw() { return reinterpret_cast<unsigned char*>(storage_.get()); }
    const unsigned char* raw() const { return reinterpret_cast<const unsigned char*>(storage_.get()); }

    std::size_t bytes_;
    std::size_t words_;
    std::unique_ptr<std::uint64_t[]> storage_;
};

NumericArray read_back(const GuardedBuffer& b, ScalarType t, std::size_t n)
{
    auto copy = [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> v(n);
        std::memcpy(v.data(), b.data(), n * sizeof(T));
        return NumericArray(std::move(v));
    };
    switch (t) {
    case ScalarType::Int32:
        return copy(std::int32_t{});
    case ScalarType::Float32:
        return copy(float{});
    default:
        return copy(double{});
    }
}

std::string describe_list(const std::vector<std::size_t>& v)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + std::to_string(v[i]);
    return s + "]";
}

void check_lengths(const FunctionShape& shape, const std::vector<std::size_t>& in_lengths,
                   const std::vector<std::size_t>& out_lengths)
{
    if (!shape.overridable)
        throw ShapeError(ShapeErrorKind::Override, -1, "function '" + shape.name + "' is not overridable");
    if (in_lengths.size() != shape.in_types.size() || out_lengths.size() != shape.out_types.size())
        throw ShapeError(ShapeErrorKind::Arity, -1,
                         "function '" + shape.name + "' takes " + std::to_string(shape.out_types.size()) + " outputs and "
                             + std::to_string(shape.in_types.size()) + " inputs; overrides cannot change that");
    for (std::size_t i = 0; i < in_lengths.size(); ++i)
        if (in_lengths[i] < 1)
            throw ShapeError(ShapeErrorKind::Length, static_cast<int>(i), "input lengths must be at least 1");
    for (std::size_t v : out_lengths)
        if (v < 1)
            throw ShapeError(ShapeErrorKind::Length, -1, "output lengths must be at least 1");
}

} // namespace

LoadedPlugin::LoadedPlugin(std::filesystem::path library, void* handle)
    : library_(std::move(library)), handle_(handle)
{
}

LoadedPlugin::~LoadedPlugin()
{
    if (handle_)
        dlclose(handle_);
}

std::shared_ptr<LoadedPlugin> LoadedPlugin::load(const std::filesystem::path& library, PluginManifest manifest)
{
    void* handle = dlopen(library.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle) {
        const char* why = dlerror();
        throw PluginLoadError("cannot load " + library.string() + ": " + (why ? why : "unknown error"));
    }
    std::shared_ptr<LoadedPlugin> plugin(new LoadedPlugin(library, handle));
    for (auto& f : manifest.functions) {
        dlerror();
        void* symbol = dlsym(handle, f.name.c_str());
        if (!symbol || dlerror())
            throw PluginLoadError("symbol '" + f.name + "' not found in " + library.string());
        plugin->entries_.push_back({std::move(f), symbol});
    }
    return plugin;
}

std::vector<std::string> LoadedPlugin::function_names() const
{
    std::vector<std::string> names;
    for (const auto& e : entries_)
        names.push_back(e.shape.name);
    return names;
}

const LoadedPlugin::Entry& LoadedPlugin::entry(std::string_view name) const
{
    for (const auto& e : entries_)
        if (e.shape.name == name)
            return e;
    throw ShapeError(ShapeErrorKind::UnknownFunction, -1, "no function '" + std::string(name) + "' in "
                                                              + library_.string());
}

FunctionShape LoadedPlugin::shape(std::string_view name) const
{
    const Entry& e = entry(name);
    std::shared_lock lock(shapes_mutex_);
    return e.shape;
}

std::vector<NumericArray> LoadedPlugin::call(std::string_view name, const std::vector<NumericArray>& inputs) const
{
    const Entry& e = entry(name);
    FunctionShape current;
    {
        std::shared_lock lock(shapes_mutex_);
        current = e.shape;
    }
    return invoke(e, current, inputs);
}

std::vector<NumericArray> LoadedPlugin::call_with_lengths(std::string_view name,
                                                          const std::vector<std::size_t>& in_lengths,
                                                          const std::vector<std::size_t>& out_lengths,
                                                          const std::vector<NumericArray>& inputs) const
{
    const Entry& e = entry(name);
    FunctionShape temporary;
    {
        std::shared_lock lock(shapes_mutex_);
        temporary = e.shape;
    }
    check_lengths(temporary, in_lengths, out_lengths);
    temporary.in_lengths = in_lengths;
    temporary.out_lengths = out_lengths;
    return invoke(e, temporary, inputs);
}

FunctionShape LoadedPlugin::override_lengths(std::string_view name, std::vector<std::size_t> in_lengths,
                                             std::vector<std::size_t> out_lengths)
{
    const Entry& e = entry(name);
    std::unique_lock lock(shapes_mutex_);
    check_lengths(e.shape, in_lengths, out_lengths);
    auto& shape = const_cast<FunctionShape&>(e.shape);
    shape.in_lengths = std::move(in_lengths);
    shape.out_lengths = std::move(out_lengths);
    return shape;
}

std::vector<NumericArray> LoadedPlugin::invoke(const Entry& e, const FunctionShape& shape,
                                               const std::vector<NumericArray>& inputs) const
{
    if (inputs.size() != shape.in_types.size())
        throw ShapeError(ShapeErrorKind::Arity, -1,
                         "function '" + shape.name + "' expects " + std::to_string(shape.in_types.size())
                             + " inputs, got " + std::to_string(inputs.size()));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (type_of(inputs[i]) != shape.in_types[i])
            throw ShapeError(ShapeErrorKind::Type, static_cast<int>(i),
                             "function '" + shape.name + "' input " + std::to_string(i) + ": expected "
                                 + std::string(scalar_name(shape.in_types[i])) + ", got "
                                 + std::string(scalar_name(type_of(inputs[i]))));
        if (length_of(inputs[i]) != shape.in_lengths[i])
            throw ShapeError(ShapeErrorKind::Length, static_cast<int>(i),
                             "function '" + shape.name + "' input " + std::to_string(i) + ": expected length "
                                 + std::to_string(shape.in_lengths[i]) + ", got "
                                 + std::to_string(length_of(inputs[i])) + " (declared " + describe_list(shape.in_lengths)
                                 + ")");
    }

    std::vector<GuardedBuffer> buffers;
    buffers.reserve(shape.arity());
    for (std::size_t k = 0; k < shape.out_types.size(); ++k)
        buffers.emplace_back(shape.out_lengths[k] * scalar_size(shape.out_types[k]));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto& b = buffers.emplace_back(shape.in_lengths[i] * scalar_size(shape.in_types[i]));
        std::visit([&](const auto& v) { std::memcpy(b.data(), v.data(), v.size() * sizeof(v[0])); }, inputs[i]);
    }
    std::vector<void*> args;
    for (auto& b : buffers)
        args.push_back(b.data());

    if (shape.reentrant) {
        invokers[args.size()](e.symbol, args.data());
    } else {
        std::lock_guard lock(call_mutex_);
        invokers[args.size()](e.symbol, args.data());
    }

    const std::size_t n_out = shape.out_types.size();
    for (std::size_t k = 0; k < buffers.size(); ++k)
        if (!buffers[k].intact())
            throw ShapeError(ShapeErrorKind::Overrun, static_cast<int>(k),
                             "function '" + shape.name + "' wrote outside "
                                 + (k < n_out ? "output " + std::to_string(k) : "input " + std::to_string(k - n_out)));

    std::vector<NumericArray> outputs;
    for (std::size_t k = 0; k < n_out; ++k)
        outputs.push_back(read_back(buffers[k], shape.out_types[k], shape.out_lengths[k]));
    return outputs;
}

std::shared_ptr<LoadedPlugin> load_plugin(const std::filesystem::path& library, PluginManifest manifest)
{
    return LoadedPlugin::load(library, std::move(manifest));
}

std::shared_ptr<LoadedPlugin> load_plugin(const std::filesystem::path& library, const std::filesystem::path& manifest)
{
    return LoadedPlugin::load(library, load_manifest(manifest));
}

// ---------------------------------------------------------------------------------------------

namespace {

class PluginPotential final : public ExternalPotential {
public:
    PluginPotential(std::shared_ptr<const LoadedPlugin> plugin, std::string name, bool counted)
        : plugin_(std::move(plugin)), name_(std::move(name)), counted_(counted)
    {
    }

    double eval(double r) const override
    {
        std::vector<NumericArray> in{std::vector<double>{r}};
        std::vector<std::size_t> in_lengths{1};
        if (counted_) {
            in.emplace_back(std::vector<std::int32_t>{1});
            in_lengths.push_back(1);
        }
        const auto out = plugin_->call_with_lengths(name_, in_lengths, {1}, in);
        return std::get<std::vector<double>>(out[0])[0];
    }

    void eval_batch(std::span<const double> r, std::span<double> out) const override
    {
        if (!counted_ || r.empty()) {
            for (std::size_t i = 0; i < r.size(); ++i)
                out[i] = eval(r[i]);
            return;
        }
        if (r.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
            throw AdapterError("batch of " + std::to_string(r.size()) + " radii exceeds the INT32 count argument");
        const auto n = static_cast<std::int32_t>(r.size());
        const std::vector<NumericArray> in{std::vector<double>(r.begin(), r.end()), std::vector<std::int32_t>{n}};
        const auto result = plugin_->call_with_lengths(name_, {r.size(), 1}, {r.size()}, in);
        const auto& values = std::get<std::vector<double>>(result[0]);
        std::copy(values.begin(), values.end(), out.begin());
    }

    std::string describe() const override { return "plugin " + plugin_->library().string() + ":" + name_; }

private:
    std::shared_ptr<const LoadedPlugin> plugin_;
    std::string name_;
    bool counted_;
};

} // namespace

PotentialSpec potential_from_plugin(std::shared_ptr<const LoadedPlugin> plugin, std::string_view name)
{
    if (!plugin)
        throw AdapterError("no plugin given");
    const FunctionShape s = plugin->shape(name);
    const std::string who = "function '" + s.name + "'";
    if (s.out_types != std::vector<ScalarType>{ScalarType::Float64} || s.out_lengths != std::vector<std::size_t>{1})
        throw AdapterError(who + " must have exactly one FLOAT64[1] output to serve as a potential");
    const bool plain = s.in_types == std::vector<ScalarType>{ScalarType::Float64};
    const bool counted = s.in_types == std::vector<ScalarType>{ScalarType::Float64, ScalarType::Int32};
    if (!plain && !counted)
        throw AdapterError(who + " must take one FLOAT64 input, optionally followed by an INT32 count");
    if (std::any_of(s.in_lengths.begin(), s.in_lengths.end(), [](std::size_t v) { return v != 1; }))
        throw AdapterError(who + " must declare unit input lengths");
    if (!s.overridable)
        throw AdapterError(who + " must be overridable to serve as a potential");
    return PotentialSpec::external(std::make_shared<PluginPotential>(std::move(plugin), s.name, counted));
}

} // namespace qshoot
