public class ClassDelta {
    public static void main(String[] args) {
        int balance = 250;
        if (balance > 100) {
            System.out.println("HIGH");
        } else {
            System.out.println("LOW");
        }
    }
}
