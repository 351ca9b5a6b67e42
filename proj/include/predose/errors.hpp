#pragma once

#include <stdexcept>
#include <string>

namespace predose {

// Base class for all library errors. The C API maps these to status codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Too few samples, or zero variance where spread is required.
class DegenerateSampleError : public Error {
public:
    using Error::Error;
};

// Two grid densities that must share a grid do not.
class GridMismatchError : public Error {
public:
    using Error::Error;
};

// Invalid or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Required parameter missing when mapping posteriors between studies.
class MappingError : public Error {
public:
    using Error::Error;
};

// Could not find a finite starting point for the sampler.
class InitializationError : public Error {
public:
    using Error::Error;
};

// Draw subsampling impossible (fewer draws than requested).
class SamplingError : public Error {
public:
    using Error::Error;
};

// Mode search or curvature estimation failed.
class OptimizationError : public Error {
public:
    using Error::Error;
};

// Dose bracket not found within the search interval.
class NoSolutionError : public Error {
public:
    using Error::Error;
};

// Study-selection rule is defined for exactly three studies.
class UnsupportedCardinalityError : public Error {
public:
    using Error::Error;
};

// Product of densities has numerically empty support.
class IncommensurableSupportError : public Error {
public:
    using Error::Error;
};

// Too many failed replications in a campaign.
class CampaignError : public Error {
public:
    using Error::Error;
};

// File read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace predose
