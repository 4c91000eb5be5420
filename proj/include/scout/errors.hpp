#ifndef SCOUT_ERRORS_HPP
#define SCOUT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace scout {

// Every failure the library reports derives from Error so callers can catch
// one type at the pipeline boundary and keep running.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class SyncError : public Error {
public:
    using Error::Error;
};

class FramingError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class UndefinedMetric : public Error {
public:
    using Error::Error;
};

} // namespace scout

#endif // SCOUT_ERRORS_HPP
