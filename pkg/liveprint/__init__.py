"""
liveprint - определение живого отпечатка пальца по мерам качества одного изображения
"""

__version__ = "1.0.0"
