#pragma once

#include <stdexcept>
#include <string>

namespace shrimpmorph {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define SHRIMPMORPH_DEFINE_ERROR(Name)          \
  class Name : public Error {                   \
  public:                                       \
    using Error::Error;                         \
  }

// Precondition violations on arguments (bad fractions, bad hyperparameters, ...).
SHRIMPMORPH_DEFINE_ERROR(InvalidArgument);

SHRIMPMORPH_DEFINE_ERROR(MissingKeypoint);
SHRIMPMORPH_DEFINE_ERROR(ParseError);
SHRIMPMORPH_DEFINE_ERROR(SchemaError);
SHRIMPMORPH_DEFINE_ERROR(UnknownVariable);
SHRIMPMORPH_DEFINE_ERROR(IoError);
SHRIMPMORPH_DEFINE_ERROR(FormatError);
SHRIMPMORPH_DEFINE_ERROR(EmptyCorpus);
SHRIMPMORPH_DEFINE_ERROR(DegenerateData);
SHRIMPMORPH_DEFINE_ERROR(KindMismatch);
SHRIMPMORPH_DEFINE_ERROR(MissingLabel);
SHRIMPMORPH_DEFINE_ERROR(ShapeMismatch);
SHRIMPMORPH_DEFINE_ERROR(OutOfBounds);
SHRIMPMORPH_DEFINE_ERROR(VariantMismatch);
SHRIMPMORPH_DEFINE_ERROR(MissingVariant);
SHRIMPMORPH_DEFINE_ERROR(UnitMismatch);
SHRIMPMORPH_DEFINE_ERROR(MissingModel);
SHRIMPMORPH_DEFINE_ERROR(MissingVariable);
SHRIMPMORPH_DEFINE_ERROR(DegenerateArea);
SHRIMPMORPH_DEFINE_ERROR(NotFound);
SHRIMPMORPH_DEFINE_ERROR(AlreadyResolved);
SHRIMPMORPH_DEFINE_ERROR(CorruptRecord);
SHRIMPMORPH_DEFINE_ERROR(ModelLoadError);
SHRIMPMORPH_DEFINE_ERROR(BindError);
SHRIMPMORPH_DEFINE_ERROR(UsageError);

#undef SHRIMPMORPH_DEFINE_ERROR

}  // namespace shrimpmorph
