from config import setup_django

setup_django()
