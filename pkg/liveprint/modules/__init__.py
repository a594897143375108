"""
Модули liveprint
"""
