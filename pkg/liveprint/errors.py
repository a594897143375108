"""
Исключения liveprint
"""


class LivenessError(Exception):
    """Базовая ошибка инструментария"""

    @property
    def name(self) -> str:
        """Имя ошибки для журналов (имя класса)"""
        return type(self).__name__


class ConfigError(LivenessError):
    """Некорректная конфигурация"""


# PGM

class PGMError(LivenessError):
    """Ошибка чтения PGM"""


class MalformedHeader(PGMError):
    pass


class TruncatedData(PGMError):
    pass


class UnsupportedDepth(PGMError):
    pass


# Анализ изображения

class ImageTooSmall(LivenessError):
    pass


class EmptyForeground(LivenessError):
    """Ни один блок не прошёл сегментацию: образец непригоден"""


class ZeroEnergy(LivenessError):
    pass


class DegenerateBlock(LivenessError):
    """X-сигнатура блока содержит меньше двух пиков"""


class NoReliableBlocks(LivenessError):
    pass


# Классификация

class ClassificationError(LivenessError):
    pass


class DegenerateTraining(ClassificationError):
    pass


class ZeroVariance(ClassificationError):
    pass


class MixedSensors(ClassificationError):
    pass


# Манифест и командная строка

class ManifestError(LivenessError):
    pass


class BadHeader(ManifestError):
    pass


class BadLabel(ManifestError):
    pass


class DuplicatePath(ManifestError):
    pass


class BadRecord(ManifestError):
    pass


class BadFeatureName(LivenessError):
    pass


class UnknownSensor(LivenessError):
    pass


class TooFewSamples(LivenessError):
    pass


class BadSpec(LivenessError):
    pass
